"""Command-line entry point: ``rsgeom <command> [flags]``.

Every command writes its artifacts, prints one JSON line per record to
stdout and, with ``--report``, the same records as CSV. Numeric fields are
rounded to 6 significant digits. Exit status is 0 on success, 1 on a
domain or I/O error (class name printed to stderr) and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from rsgeom import fileio
from rsgeom import quaternion as quat
from rsgeom.dataset import export_dataset, generate_frame, load_manifest
from rsgeom.errors import RsGeomError
from rsgeom.geometry import CoordinateMap, RsFrame, Twist, correction_map
from rsgeom.imu import gyro_integrate_rowposes, rotate_to_camera
from rsgeom.metrics import aggregate_epe, ate_sim3, epe, improvement_ratio
from rsgeom.render import fill_holes, render_corrected
from rsgeom.rowposes import constant_velocity_rowposes
from rsgeom.synthesis import synthesize_rs

log = logging.getLogger("rsgeom")


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(f"{float(x):.6g}")
    return x


def _text(x):
    x = _num(x)
    return f"{x:.6g}" if isinstance(x, float) else str(x)


def emit(records: list[dict], report: str | None) -> None:
    for r in records:
        print(json.dumps({k: _num(v) for k, v in r.items()}))
    if report:
        fields = list(dict.fromkeys(k for r in records for k in r))
        with open(report, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(fields)
            for r in records:
                w.writerow([_text(r.get(k, "")) for k in fields])


def _camera(args):
    K, clock, cfg = fileio.load_camera(args.config)
    lut = fileio.read_lut(args.lut, clock.sensor_rows) if getattr(args, "lut", None) else None
    return K, clock, cfg, lut


def _floats(text: str, n: int) -> np.ndarray:
    vals = [float(v) for v in text.replace(",", " ").split()]
    if len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} numbers, got {text!r}")
    return np.array(vals)


def cmd_synthesize(args):
    K, clock, _, lut = _camera(args)
    image = fileio.read_image(args.image)
    depth = fileio.read_depth(args.depth)
    if args.rowposes:
        table = fileio.read_rowposes(args.rowposes)
    else:
        tw = _floats(args.twist, 6)
        table = constant_velocity_rowposes(Twist(tw[:3], tw[3:]), clock)
    frame, gt_map = synthesize_rs(image, depth, table, K, clock, lut)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_image(out / "rs.png", frame.image)
    fileio.write_depth(out / "depth.pfm", frame.depth)
    fileio.write_coordinate_map(out / "gtmap.pfm", gt_map)
    fileio.write_rowposes(out / "rowposes.txt", table, clock.image_row_times())
    distortion = epe(CoordinateMap.identity(gt_map.shape), gt_map)
    emit([{"valid_count": int(gt_map.valid.sum()),
           "valid_fraction": float(gt_map.valid.mean()),
           "input_epe_px": distortion.mean_px}], args.report)


def cmd_correct(args):
    K, clock, _, lut = _camera(args)
    frame = RsFrame(fileio.read_image(args.image), fileio.read_depth(args.depth), K, clock, lut)
    table = fileio.read_rowposes(args.rowposes)
    cmap = correction_map(frame, table)
    splat = render_corrected(frame, cmap)
    dense, holes = fill_holes(splat.image, splat.filled, args.radius)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_image(out / "gs1.png", dense)
    fileio.write_image(out / "holes.png", np.where(holes, 255, 0))
    fileio.write_coordinate_map(out / "map.pfm", cmap)
    emit([{"valid_count": int(cmap.valid.sum()),
           "holes_before_fill": int((~splat.filled).sum()),
           "holes_after_fill": int(holes.sum())}], args.report)


def cmd_gen_gt(args):
    manifest = load_manifest(args.config)
    if args.frame is None:
        if args.flow_fwd or args.flow_bwd:
            raise RsGeomError("--flow-fwd/--flow-bwd require --frame")
        s = export_dataset(manifest, args.out)
        records = [{"frame_id": o.frame_id, "status": "kept" if o.kept else "dropped",
                    "reason": o.reason, "valid_fraction": o.valid_fraction if o.kept else "",
                    "flagged": o.flagged} for o in s.outcomes]
        records.append({"frame_id": "TOTAL", "status": f"kept={s.frames_out}",
                        "reason": f"dropped={s.frames_dropped}",
                        "valid_fraction": s.mean_valid_fraction, "flagged": s.frames_flagged})
        emit(records, args.report)
        return
    ids = [f.frame_id for f in manifest.frames]
    if args.frame not in ids:
        raise RsGeomError(f"frame {args.frame!r} not in manifest")
    i = ids.index(args.frame)
    fwd = fileio.read_flo(args.flow_fwd) if args.flow_fwd else None
    bwd = fileio.read_flo(args.flow_bwd) if args.flow_bwd else None
    gt = generate_frame(manifest, i, fwd, bwd)
    out = Path(args.out) / manifest.name / args.frame
    out.mkdir(parents=True, exist_ok=True)
    entry = manifest.frames[i]
    clock = manifest.calibration.clock.at(entry.timestamp)
    fileio.write_image(out / "rs.png", fileio.read_image(entry.rs_image))
    fileio.write_image(out / "gs1.png", gt.gs1_image)
    fileio.write_depth(out / "depth.pfm", gt.depth)
    fileio.write_coordinate_map(out / "gtmap.pfm", gt.gt_map)
    fileio.write_rowposes(out / "rowposes.txt", gt.rowposes, clock.image_row_times())
    emit([{"frame_id": args.frame, "status": "kept", "reason": "",
           "valid_fraction": gt.valid_fraction, "flagged": gt.flagged}], args.report)


def _paired(name, items, n):
    if len(items) != n:
        raise RsGeomError(f"{name}: expected {n} paths, got {len(items)}")
    return items


def cmd_evaluate_epe(args):
    gts = [fileio.read_coordinate_map(p) for p in args.gt]
    if args.pred:
        preds = [fileio.read_coordinate_map(p) for p in _paired("--pred", args.pred, len(gts))]
    else:
        if not (args.rowposes and args.depth and args.config):
            raise RsGeomError("evaluate-epe needs --pred, or --rowposes with --depth and --config")
        K, clock, _, lut = _camera(args)
        preds = []
        for d, r in zip(_paired("--depth", args.depth, len(gts)),
                        _paired("--rowposes", args.rowposes, len(gts))):
            depth = fileio.read_depth(d)
            frame = RsFrame(np.zeros(depth.shape), depth, K, clock, lut)
            preds.append(correction_map(frame, fileio.read_rowposes(r)))
    records, reports, inputs = [], [], []
    for path, gt, pred in zip(args.gt, gts, preds):
        rep = epe(pred, gt)
        base = epe(CoordinateMap.identity(gt.shape), gt)
        reports.append(rep)
        inputs.append(base.mean_px)
        records.append({"frame": str(path), "epe_px": rep.mean_px, "median_px": rep.median_px,
                        "input_epe_px": base.mean_px, "valid_count": rep.valid_count})
    agg = aggregate_epe(reports)
    ratio = improvement_ratio(inputs, [r.mean_px for r in reports])
    records.append({"frame": "ALL", "epe_px": agg.mean_px, "median_px": agg.median_px,
                    "input_epe_px": float(np.mean(inputs)), "valid_count": agg.valid_count,
                    "improved": ratio.improved_count, "total": ratio.total, "ratio": ratio.ratio})
    emit(records, args.report)


def cmd_evaluate_ate(args):
    gt = fileio.read_trajectory(args.gt)
    tol = args.tolerance if args.tolerance is not None else 0.5 * args.frame_period
    records, rmses = [], []
    for path in args.est:
        rep = ate_sim3(fileio.read_trajectory(path), gt, tol)
        rmses.append(rep.rmse_m)
        records.append({"trajectory": str(path), "rmse_m": rep.rmse_m,
                        "scale": rep.alignment.scale, "pairs": rep.pairs})
    records.append({"trajectory": "MEAN", "rmse_m": float(np.mean(rmses)), "scale": "",
                    "pairs": len(rmses)})
    emit(records, args.report)


def cmd_imu_rowposes(args):
    K, clock, cfg, _ = _camera(args)
    series = fileio.read_imu_csv(args.imu, frame=args.imu_frame)
    if series.frame == "imu":
        if "cam_from_imu" not in cfg:
            raise RsGeomError("config has no cam_from_imu; pass --imu-frame camera if the data is already rotated")
        series = rotate_to_camera(series, fileio.quaternion_from_config(cfg["cam_from_imu"]))
    bias = _floats(args.bias, 3) if args.bias else None
    frame_clock = clock.at(args.frame_time)
    table = gyro_integrate_rowposes(series, frame_clock, bias=bias, substeps=args.substeps)
    fileio.write_rowposes(args.out, table, frame_clock.image_row_times())
    last = table[len(table) - 1]
    angle = float(np.linalg.norm(quat.to_rotvec(last.rotation)))
    emit([{"rows": len(table), "final_angle_rad": angle}], args.report)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rsgeom", description="Rolling-shutter geometry toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synthesize", help="render an RS frame from a GS image + depth")
    s.add_argument("--config", required=True, help="camera key-value config")
    s.add_argument("--image", required=True)
    s.add_argument("--depth", required=True, help="GS depth (PFM)")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--rowposes", help="row-pose table (trajectory format)")
    g.add_argument("--twist", help="constant velocity 'wx wy wz vx vy vz' (rad/s, m/s)")
    s.add_argument("--lut")
    s.add_argument("--out", required=True)
    s.add_argument("--report")
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("correct", help="map an RS frame to row 0 and render it")
    s.add_argument("--config", required=True)
    s.add_argument("--image", required=True)
    s.add_argument("--depth", required=True, help="RS depth (PFM)")
    s.add_argument("--rowposes", required=True)
    s.add_argument("--lut")
    s.add_argument("--radius", type=float, default=3.0, help="hole-fill radius (px)")
    s.add_argument("--out", required=True)
    s.add_argument("--report")
    s.set_defaults(func=cmd_correct)

    s = sub.add_parser("gen-gt", help="generate ground truth from a sequence manifest")
    s.add_argument("--config", required=True, help="sequence manifest")
    s.add_argument("--out", required=True)
    s.add_argument("--frame", help="process only this frame id")
    s.add_argument("--flow-fwd", help="override RS->GS0 flow (.flo) for --frame")
    s.add_argument("--flow-bwd", help="override GS0->RS flow (.flo) for --frame")
    s.add_argument("--report")
    s.set_defaults(func=cmd_gen_gt)

    s = sub.add_parser("evaluate-epe", help="end-point error and improvement ratio")
    s.add_argument("--gt", nargs="+", required=True, help="ground-truth maps (PFM)")
    s.add_argument("--pred", nargs="+", help="predicted maps (PFM)")
    s.add_argument("--rowposes", nargs="+", help="predicted row-pose tables")
    s.add_argument("--depth", nargs="+", help="ground-truth RS depth maps (PFM)")
    s.add_argument("--config")
    s.add_argument("--lut")
    s.add_argument("--report")
    s.set_defaults(func=cmd_evaluate_epe)

    s = sub.add_parser("evaluate-ate", help="ATE after Sim(3) alignment, averaged over runs")
    s.add_argument("--est", nargs="+", required=True, help="estimated trajectories")
    s.add_argument("--gt", required=True)
    s.add_argument("--tolerance", type=float, help="association tolerance (s)")
    s.add_argument("--frame-period", type=float, default=0.05,
                   help="frame period (s); default tolerance is half of it")
    s.add_argument("--report")
    s.set_defaults(func=cmd_evaluate_ate)

    s = sub.add_parser("imu-rowposes", help="gyro-integrated row-pose table for one frame")
    s.add_argument("--config", required=True)
    s.add_argument("--imu", required=True, help="IMU CSV")
    s.add_argument("--imu-frame", choices=["imu", "camera"], default="imu")
    s.add_argument("--frame-time", type=float, required=True, help="row-0 time (s)")
    s.add_argument("--bias", help="gyro bias 'bx by bz' (rad/s)")
    s.add_argument("--substeps", type=int, default=1)
    s.add_argument("--out", required=True)
    s.add_argument("--report")
    s.set_defaults(func=cmd_imu_rowposes)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except argparse.ArgumentTypeError as e:
        parser.error(str(e))
    except (RsGeomError, OSError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
