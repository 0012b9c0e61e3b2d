"""Ground-truth generation from stereo GS0/RS captures.

Per frame: bi-directional flow check, per-pixel triangulation against the
spline-interpolated row poses, the RS->GS1 map, and the rendered GS1 image.

The GS0 camera is assumed to be triggered together with RS row 0, so for
RS row ``r`` the relative pose is ``gs0_from_rs0 * row0_from_rowr``, with
``gs0_from_rs0`` the fixed stereo extrinsic.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from rsgeom import fileio
from rsgeom import quaternion as quat
from rsgeom.camera import Intrinsics, ReadoutClock, ScanlineLUT
from rsgeom.errors import CoverageGap, DimensionMismatch, FormatError, QueryOutOfRange
from rsgeom.geometry import (CoordinateMap, DepthMap, RsFrame, bidirectional_filter,
                             correction_map, pixel_poses, triangulate_many)
from rsgeom.imu import ImuSeries, per_row_interpolate, rotate_to_camera
from rsgeom.render import fill_holes, render_corrected
from rsgeom.se3 import Pose, PoseSpline, RowPoseTable, Trajectory, compose_arrays

log = logging.getLogger(__name__)

DEFAULT_MIN_VALID_FRACTION = 0.25


def row_pose_tables(traj: Trajectory | PoseSpline, frame_time: float, clock: ReadoutClock,
                    rows: int | None = None) -> RowPoseTable:
    """Row poses ``row0_from_rowr`` for the frame whose row 0 is read at
    ``frame_time``. Raises :class:`QueryOutOfRange` when the readout is not
    covered by the trajectory."""
    spline = traj if isinstance(traj, PoseSpline) else PoseSpline(traj)
    times = clock.at(frame_time).image_row_times(rows)
    q, t = spline.evaluate(times)
    q0_inv = quat.conjugate(q[0])
    R0t = quat.to_matrix(q0_inv)
    rel_q = quat.multiply(q0_inv, q)
    rel_t = (t - t[0]) @ R0t.T
    rel_q[0] = quat.IDENTITY
    rel_t[0] = 0.0
    return RowPoseTable(rel_q, rel_t)


@dataclass
class Calibration:
    K_rs: Intrinsics
    K_gs0: Intrinsics
    clock: ReadoutClock
    gs0_from_rs0: Pose
    lut: ScanlineLUT | None = None
    cam_from_imu: np.ndarray | None = None


@dataclass
class FrameEntry:
    frame_id: str
    timestamp: float
    rs_image: Path
    flow_fwd: Path
    flow_bwd: Path
    gs0_image: Path | None = None


@dataclass
class SequenceManifest:
    name: str
    calibration: Calibration
    frames: list
    trajectory: Path | None
    imu: Path | None = None
    min_valid_fraction: float = DEFAULT_MIN_VALID_FRACTION
    flow_tol_px: float = 1.0
    fill_radius_px: float = 3.0

    def load_trajectory(self) -> Trajectory:
        return fileio.read_trajectory(self.trajectory)

    def load_imu(self) -> ImuSeries | None:
        if self.imu is None:
            return None
        series = fileio.read_imu_csv(self.imu)
        if self.calibration.cam_from_imu is None:
            return ImuSeries(series.timestamps, series.gyro, series.accel, "camera")
        return rotate_to_camera(series, self.calibration.cam_from_imu)


def load_manifest(path) -> SequenceManifest:
    """Read a sequence manifest (``key = value``; paths relative to it)."""
    path = Path(path)
    base = path.parent
    cfg = fileio.read_config(path)
    for key in ("sequence", "frames", "trajectory", "rs_camera", "gs0_camera", "gs0_from_rs"):
        if key not in cfg:
            raise FormatError(f"{path}: manifest is missing {key!r}")
    K_rs, clock, rs_cfg = fileio.load_camera(fileio.resolve(base, cfg["rs_camera"]))
    K_gs0 = fileio.intrinsics_from_config(fileio.read_config(fileio.resolve(base, cfg["gs0_camera"])))
    lut = fileio.read_lut(fileio.resolve(base, cfg["lut"]), clock.sensor_rows) if "lut" in cfg else None
    ext = cfg.get("cam_from_imu", rs_cfg.get("cam_from_imu"))
    calib = Calibration(K_rs, K_gs0, clock, fileio.pose_from_config(cfg["gs0_from_rs"]), lut,
                        fileio.quaternion_from_config(ext) if ext else None)
    frames = []
    with open(fileio.resolve(base, cfg["frames"]), newline="") as f:
        for row in csv.DictReader(f):
            frames.append(FrameEntry(
                row["frame_id"].strip(), float(row["timestamp"]),
                fileio.resolve(base, row["rs_image"].strip()),
                fileio.resolve(base, row["flow_fwd"].strip()),
                fileio.resolve(base, row["flow_bwd"].strip()),
                fileio.resolve(base, row["gs0_image"].strip()) if row.get("gs0_image") else None,
            ))
    return SequenceManifest(
        cfg["sequence"], calib, frames, fileio.resolve(base, cfg["trajectory"]),
        fileio.resolve(base, cfg["imu"]) if "imu" in cfg else None,
        float(cfg.get("min_valid_fraction", DEFAULT_MIN_VALID_FRACTION)),
        float(cfg.get("flow_tol_px", 1.0)),
        float(cfg.get("fill_radius_px", 3.0)),
    )


@dataclass
class GroundTruthFrame:
    depth: DepthMap
    rowposes: RowPoseTable
    gt_map: CoordinateMap
    gs1_image: np.ndarray
    consistent: np.ndarray      # survived the bi-directional check
    holes: np.ndarray           # GS1 pixels left empty after filling
    residual: np.ndarray        # ray-to-ray distance (m), NaN where untriangulated
    valid_fraction: float
    flagged: bool

    @property
    def valid(self) -> np.ndarray:
        return self.depth.valid


def build_ground_truth(rs_image, flow_fwd, flow_bwd, rowposes: RowPoseTable, calib: Calibration,
                       clock: ReadoutClock | None = None, flow_tol_px: float = 1.0,
                       min_valid_fraction: float = DEFAULT_MIN_VALID_FRACTION,
                       fill_radius_px: float = 3.0) -> GroundTruthFrame:
    """Ground truth for one frame from in-memory inputs.

    ``flow_fwd`` maps RS pixels into GS0 (``u_gs0 = u_rs + fwd``) and
    ``flow_bwd`` maps GS0 pixels back into RS.
    """
    clock = calib.clock if clock is None else clock
    K = calib.K_rs
    h, w = K.height, K.width
    rs_image = np.asarray(rs_image, dtype=float)
    flow_fwd = np.asarray(flow_fwd, dtype=float)
    flow_bwd = np.asarray(flow_bwd, dtype=float)
    if flow_fwd.shape[:2] != (h, w) or rs_image.shape[:2] != (h, w):
        raise DimensionMismatch(f"flow {flow_fwd.shape[:2]} / image {rs_image.shape[:2]} vs {(h, w)}")
    if flow_bwd.shape != flow_fwd.shape:
        raise DimensionMismatch(f"backward flow {flow_bwd.shape} vs forward flow {flow_fwd.shape}")
    if len(rowposes) != h:
        raise DimensionMismatch(f"row-pose table has {len(rowposes)} rows, image has {h}")

    consistent = bidirectional_filter(flow_fwd, flow_bwd, flow_tol_px)

    R, t = compose_arrays(calib.gs0_from_rs0, *pixel_poses(rowposes, clock, calib.lut, (h, w)))
    vv, uu = np.mgrid[0:h, 0:w].astype(float)
    u_rs = np.stack([uu, vv], axis=-1)
    u_gs0 = u_rs + np.where(consistent[..., None], flow_fwd, 0.0)
    X, residual, ok = triangulate_many(u_gs0, u_rs, R, t, K, calib.K_gs0)
    valid = consistent & ok
    depth = DepthMap(np.where(valid, X[..., 2], 0.0), valid)

    frame = RsFrame(rs_image, depth, K, clock, calib.lut)
    gt_map = correction_map(frame, rowposes)
    splat = render_corrected(frame, gt_map)
    gs1, holes = fill_holes(splat.image, splat.filled, fill_radius_px)
    fraction = float(depth.valid.mean())
    return GroundTruthFrame(depth, rowposes, gt_map, gs1, consistent, holes,
                            np.where(valid, residual, np.nan), fraction,
                            fraction < min_valid_fraction)


def generate_frame(manifest: SequenceManifest, frame_index: int, flow_fwd=None, flow_bwd=None,
                   trajectory: Trajectory | PoseSpline | None = None) -> GroundTruthFrame:
    entry = manifest.frames[frame_index]
    calib = manifest.calibration
    traj = manifest.load_trajectory() if trajectory is None else trajectory
    clock = calib.clock.at(entry.timestamp)
    table = row_pose_tables(traj, entry.timestamp, calib.clock)
    fwd = fileio.read_flo(entry.flow_fwd) if flow_fwd is None else flow_fwd
    bwd = fileio.read_flo(entry.flow_bwd) if flow_bwd is None else flow_bwd
    return build_ground_truth(fileio.read_image(entry.rs_image), fwd, bwd, table, calib, clock,
                              manifest.flow_tol_px, manifest.min_valid_fraction,
                              manifest.fill_radius_px)


@dataclass
class FrameOutcome:
    frame_id: str
    kept: bool
    reason: str = ""
    valid_fraction: float = float("nan")
    flagged: bool = False


@dataclass
class DatasetSummary:
    sequence: str
    outcomes: list = field(default_factory=list)

    @property
    def frames_in(self) -> int:
        return len(self.outcomes)

    @property
    def frames_out(self) -> int:
        return sum(o.kept for o in self.outcomes)

    @property
    def frames_dropped(self) -> int:
        return sum(not o.kept for o in self.outcomes)

    @property
    def frames_flagged(self) -> int:
        return sum(o.kept and o.flagged for o in self.outcomes)

    @property
    def mean_valid_fraction(self) -> float:
        kept = [o.valid_fraction for o in self.outcomes if o.kept]
        return float(np.mean(kept)) if kept else float("nan")


SUMMARY_FIELDS = ["frame_id", "status", "reason", "valid_fraction", "flagged"]
TOTAL_FIELDS = ["frames_in", "frames_kept", "frames_dropped", "frames_flagged", "mean_valid_fraction"]
PARTIAL_MARKER = "PARTIAL"


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def export_dataset(manifest: SequenceManifest, out_dir) -> DatasetSummary:
    """Write ``<out>/<sequence>/<frame_id>/{rs.png, gs1.png, depth.pfm,
    gtmap.pfm, rowposes.txt}`` plus ``summary.csv`` and ``totals.csv``.

    Frames whose readout is not covered by the trajectory (or IMU, when
    one is given) are dropped with a reason code. A ``PARTIAL`` marker
    stays in the sequence directory if writing fails part-way.
    """
    seq_dir = Path(out_dir) / manifest.name
    seq_dir.mkdir(parents=True, exist_ok=True)
    marker = seq_dir / PARTIAL_MARKER
    marker.write_text("export in progress\n")
    summary = DatasetSummary(manifest.name)
    calib = manifest.calibration

    spline = None
    if manifest.frames:
        traj = manifest.load_trajectory()
        spline = PoseSpline(traj)
    imu = manifest.load_imu() if manifest.frames else None

    for entry in manifest.frames:
        clock = calib.clock.at(entry.timestamp)
        try:
            table = row_pose_tables(spline, entry.timestamp, calib.clock)
        except QueryOutOfRange as e:
            log.info("dropping frame %s: %s", entry.frame_id, e)
            summary.outcomes.append(FrameOutcome(entry.frame_id, False, "trajectory_coverage"))
            continue
        imu_rows = None
        if imu is not None:
            try:
                imu_rows = per_row_interpolate(imu, clock)
            except CoverageGap as e:
                log.info("dropping frame %s: %s", entry.frame_id, e)
                summary.outcomes.append(FrameOutcome(entry.frame_id, False, "imu_coverage"))
                continue
        try:
            rs = fileio.read_image(entry.rs_image)
            fwd = fileio.read_flo(entry.flow_fwd)
            bwd = fileio.read_flo(entry.flow_bwd)
        except FileNotFoundError as e:
            log.info("dropping frame %s: %s", entry.frame_id, e)
            summary.outcomes.append(FrameOutcome(entry.frame_id, False, "missing_input"))
            continue
        try:
            gt = build_ground_truth(rs, fwd, bwd, table, calib, clock, manifest.flow_tol_px,
                                    manifest.min_valid_fraction, manifest.fill_radius_px)
        except DimensionMismatch as e:
            log.info("dropping frame %s: %s", entry.frame_id, e)
            summary.outcomes.append(FrameOutcome(entry.frame_id, False, "shape_mismatch"))
            continue

        fdir = seq_dir / entry.frame_id
        fdir.mkdir(exist_ok=True)
        fileio.write_image(fdir / "rs.png", rs)
        fileio.write_image(fdir / "gs1.png", gt.gs1_image)
        fileio.write_depth(fdir / "depth.pfm", gt.depth)
        fileio.write_coordinate_map(fdir / "gtmap.pfm", gt.gt_map)
        fileio.write_rowposes(fdir / "rowposes.txt", table, clock.image_row_times())
        if imu_rows is not None:
            fileio.write_imu_csv(fdir / "imu.csv", clock.image_row_times(), *imu_rows)
        if gt.flagged:
            log.warning("frame %s: valid fraction %.3f below %.3f", entry.frame_id,
                        gt.valid_fraction, manifest.min_valid_fraction)
        summary.outcomes.append(FrameOutcome(entry.frame_id, True, "", gt.valid_fraction, gt.flagged))

    with open(seq_dir / "summary.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for o in summary.outcomes:
            w.writerow([o.frame_id, "kept" if o.kept else "dropped", o.reason,
                        _fmt(o.valid_fraction) if o.kept else "", int(o.flagged)])
    with open(seq_dir / "totals.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TOTAL_FIELDS)
        w.writerow([summary.frames_in, summary.frames_out, summary.frames_dropped,
                    summary.frames_flagged, _fmt(summary.mean_valid_fraction)])
    marker.unlink()
    return summary
