"""Readers and writers for the on-disk formats.

* PFM (``Pf`` one channel, ``PF`` three channels), float32, rows stored
  bottom-to-top, negative scale meaning little-endian.
* Middlebury ``.flo``: ``PIEH`` magic, int32 width and height, then
  float32 ``(u, v)`` pairs in row-major order, little-endian.
* TUM trajectories: ``timestamp tx ty tz qx qy qz qw`` per line.
* IMU CSV with header ``timestamp,wx,wy,wz,ax,ay,az``.
* Plain ``key = value`` config files, ``#`` comments.
"""
from __future__ import annotations

import csv
import os
from pathlib import Path

import numpy as np
from PIL import Image

from rsgeom import quaternion as quat
from rsgeom.camera import Intrinsics, ReadoutClock, ScanlineLUT
from rsgeom.errors import FormatError
from rsgeom.geometry import CoordinateMap, DepthMap
from rsgeom.imu import ImuSeries
from rsgeom.se3 import Pose, RowPoseTable, Trajectory

FLO_MAGIC = b"PIEH"


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        tag = f.readline().strip()
        if tag == b"PF":
            channels = 3
        elif tag == b"Pf":
            channels = 1
        else:
            raise FormatError(f"{path}: not a PFM file (tag {tag!r})")
        dims = f.readline().split()
        while not dims:
            dims = f.readline().split()
        width, height = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.fromfile(f, dtype=dtype, count=width * height * channels)
    if data.size != width * height * channels:
        raise FormatError(f"{path}: truncated PFM payload")
    shape = (height, width, 3) if channels == 3 else (height, width)
    return np.flipud(data.reshape(shape)).astype(np.float32)


def write_pfm(path, image) -> None:
    image = np.asarray(image, dtype="<f4")
    if image.ndim == 3 and image.shape[2] == 1:
        image = image[..., 0]
    if image.ndim == 2:
        tag = b"Pf"
    elif image.ndim == 3 and image.shape[2] == 3:
        tag = b"PF"
    else:
        raise ValueError(f"PFM holds 1 or 3 channels, got shape {image.shape}")
    h, w = image.shape[:2]
    with open(path, "wb") as f:
        f.write(tag + b"\n")
        f.write(f"{w} {h}\n".encode())
        f.write(b"-1.0\n")
        f.write(np.ascontiguousarray(np.flipud(image)).tobytes())


def read_flo(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != FLO_MAGIC:
            raise FormatError(f"{path}: bad .flo magic {magic!r}")
        w, h = np.frombuffer(f.read(8), dtype="<i4")
        data = np.frombuffer(f.read(), dtype="<f4")
    if data.size != 2 * w * h:
        raise FormatError(f"{path}: expected {2 * w * h} floats, found {data.size}")
    return data.reshape(h, w, 2).astype(np.float32)


def write_flo(path, flow) -> None:
    flow = np.asarray(flow, dtype="<f4")
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"flow must be (H, W, 2), got {flow.shape}")
    h, w = flow.shape[:2]
    with open(path, "wb") as f:
        f.write(FLO_MAGIC)
        f.write(np.array([w, h], dtype="<i4").tobytes())
        f.write(np.ascontiguousarray(flow).tobytes())


def read_image(path) -> np.ndarray:
    """8-bit grayscale image (PNG, PGM, ...) as float64 in [0, 255]."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=float)


def write_image(path, image) -> None:
    arr = np.clip(np.rint(np.nan_to_num(np.asarray(image, dtype=float))), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path)


def read_depth(path) -> DepthMap:
    return DepthMap(read_pfm(path).astype(float))


def write_depth(path, depth: DepthMap) -> None:
    write_pfm(path, np.where(depth.valid, depth.values, 0.0))


def read_coordinate_map(path) -> CoordinateMap:
    """Three-channel PFM: ``u``, ``v``, validity (1 or 0)."""
    data = read_pfm(path).astype(float)
    if data.ndim != 3:
        raise FormatError(f"{path}: coordinate maps are 3-channel PFM files")
    valid = data[..., 2] > 0.5
    coords = data[..., :2].copy()
    coords[~valid] = np.nan
    return CoordinateMap(coords, valid)


def write_coordinate_map(path, cmap: CoordinateMap) -> None:
    out = np.zeros(cmap.shape + (3,), dtype=float)
    out[..., :2] = np.where(cmap.valid[..., None], cmap.coords, 0.0)
    out[..., 2] = cmap.valid
    write_pfm(path, out)


def _data_lines(path):
    with open(path) as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if line:
                yield line


def read_trajectory(path) -> Trajectory:
    rows = [[float(x) for x in line.replace(",", " ").split()] for line in _data_lines(path)]
    if any(len(r) != 8 for r in rows):
        raise FormatError(f"{path}: trajectory lines need 8 fields")
    if not rows:
        return Trajectory(np.zeros(0), [])
    a = np.array(rows)
    qwxyz = a[:, [7, 4, 5, 6]]
    return Trajectory.from_arrays(a[:, 0], a[:, 1:4], qwxyz)


def format_pose_line(t: float, p: Pose) -> str:
    q = quat.canonical(p.rotation)
    vals = [*p.translation, q[1], q[2], q[3], q[0]]
    return f"{t:.9f} " + " ".join(f"{v:.12g}" for v in vals)


def write_trajectory(path, timestamps, poses) -> None:
    with open(path, "w") as f:
        f.write("# timestamp tx ty tz qx qy qz qw\n")
        for t, p in zip(timestamps, poses):
            f.write(format_pose_line(float(t), p) + "\n")


def read_rowposes(path) -> RowPoseTable:
    traj = read_trajectory(path)
    return RowPoseTable.from_poses(list(traj.poses))


def write_rowposes(path, table: RowPoseTable, times=None) -> None:
    times = np.arange(len(table), dtype=float) if times is None else times
    write_trajectory(path, times, table.poses())


IMU_HEADER = ["timestamp", "wx", "wy", "wz", "ax", "ay", "az"]


def read_imu_csv(path, frame: str = "imu") -> ImuSeries:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = [h.strip().lstrip("#").strip() for h in next(reader)]
        if header != IMU_HEADER:
            raise FormatError(f"{path}: IMU header must be {','.join(IMU_HEADER)}")
        rows = [[float(x) for x in r] for r in reader if r and r[0].strip()]
    a = np.array(rows, dtype=float).reshape(-1, 7)
    return ImuSeries(a[:, 0], a[:, 1:4], a[:, 4:7], frame)


def write_imu_csv(path, timestamps, gyro, accel) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(IMU_HEADER)
        for t, g, a in zip(timestamps, gyro, accel):
            w.writerow([f"{t:.9f}", *(f"{x:.9g}" for x in g), *(f"{x:.9g}" for x in a)])


def read_config(path) -> dict[str, str]:
    """Parse ``key = value`` lines into a dict of strings."""
    out = {}
    for line in _data_lines(path):
        if "=" not in line:
            raise FormatError(f"{path}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def intrinsics_from_config(cfg: dict) -> Intrinsics:
    try:
        return Intrinsics(float(cfg["fx"]), float(cfg["fy"]), float(cfg["cx"]), float(cfg["cy"]),
                          int(cfg["width"]), int(cfg["height"]))
    except KeyError as e:
        raise FormatError(f"camera config is missing key {e.args[0]!r}") from None


def clock_from_config(cfg: dict, frame_start: float = 0.0) -> ReadoutClock:
    height = int(cfg["height"])
    sensor_rows = int(cfg.get("sensor_rows", height))
    if "row_period_us" not in cfg:
        raise FormatError("camera config is missing key 'row_period_us'")
    return ReadoutClock(float(cfg["row_period_us"]) * 1e-6, sensor_rows, height, frame_start)


def pose_from_config(text: str) -> Pose:
    """``tx ty tz qx qy qz qw`` (TUM order) to a Pose."""
    v = _floats(text)
    if len(v) != 7:
        raise FormatError(f"pose needs 7 numbers 'tx ty tz qx qy qz qw', got {text!r}")
    return Pose([v[6], v[3], v[4], v[5]], v[:3])


def quaternion_from_config(text: str) -> np.ndarray:
    """``qx qy qz qw`` (TUM order) to ``[w, x, y, z]``."""
    v = _floats(text)
    if len(v) != 4:
        raise FormatError(f"quaternion needs 4 numbers 'qx qy qz qw', got {text!r}")
    return quat.normalize(np.array([v[3], v[0], v[1], v[2]]))


def load_camera(path):
    """Read intrinsics, readout clock and the optional extras of a camera
    config file. Returns ``(Intrinsics, ReadoutClock, cfg)``."""
    cfg = read_config(path)
    return intrinsics_from_config(cfg), clock_from_config(cfg), cfg


def read_lut(path, sensor_rows: int) -> ScanlineLUT:
    return ScanlineLUT(read_pfm(path).astype(float), sensor_rows)


def write_lut(path, lut: ScanlineLUT) -> None:
    write_pfm(path, lut.table)


def resolve(base, path) -> Path:
    p = Path(os.path.expanduser(str(path)))
    return p if p.is_absolute() else Path(base) / p
