"""Pinhole intrinsics, the rolling-shutter readout clock and scanline LUTs.

Pixel convention: ``u`` is the column, ``v`` the row, origin at the centre
of the top-left pixel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rsgeom.errors import BehindCamera, NonPositiveDepth, OutOfBounds

MIN_DEPTH = 1e-9


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width


@dataclass(frozen=True)
class ReadoutClock:
    """Capture time of each sensor row.

    ``image_rows`` may be smaller than ``sensor_rows`` when the image was
    downscaled; image row ``v`` then corresponds to sensor row
    ``v * sensor_rows / image_rows``.
    """

    row_period: float
    sensor_rows: int
    image_rows: int
    frame_start: float = 0.0

    def __post_init__(self):
        if not self.row_period > 0:
            raise ValueError("row_period must be positive")
        if not 0 < self.image_rows <= self.sensor_rows:
            raise ValueError("image_rows must be in (0, sensor_rows]")

    @property
    def scale(self) -> float:
        return self.sensor_rows / self.image_rows

    @property
    def readout_time(self) -> float:
        return self.sensor_rows * self.row_period

    def at(self, frame_start: float) -> "ReadoutClock":
        return ReadoutClock(self.row_period, self.sensor_rows, self.image_rows, frame_start)

    def image_row_times(self, rows: int | None = None) -> np.ndarray:
        """Capture time of every image row (sensor row ``r * scale``)."""
        rows = self.image_rows if rows is None else rows
        return self.frame_start + np.arange(rows) * self.scale * self.row_period

    def image_row_offsets(self, rows: int | None = None) -> np.ndarray:
        rows = self.image_rows if rows is None else rows
        return np.arange(rows) * self.scale * self.row_period


@dataclass(frozen=True)
class ScanlineLUT:
    """Per-pixel original sensor row (fractional) for a rectified image."""

    table: np.ndarray
    sensor_rows: int

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2:
            raise ValueError("scanline LUT must be a 2-D array")
        if np.any(t < 0) or np.any(t >= self.sensor_rows) or not np.all(np.isfinite(t)):
            raise ValueError("scanline LUT values must lie in [0, sensor_rows)")
        object.__setattr__(self, "table", t)

    @property
    def shape(self) -> tuple[int, int]:
        return self.table.shape

    def __call__(self, u, v):
        return self.table[v, u]


def build_identity_lut(rows: int, cols: int, sensor_rows: int) -> ScanlineLUT:
    if rows <= 0 or cols <= 0 or sensor_rows <= 0:
        raise ValueError("LUT dimensions must be positive")
    col = np.arange(rows, dtype=float) * (sensor_rows / rows)
    return ScanlineLUT(np.repeat(col[:, None], cols, axis=1), sensor_rows)


def project(K: Intrinsics, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X[2] <= MIN_DEPTH:
        raise BehindCamera(f"point {X.tolist()} has z <= {MIN_DEPTH}")
    return np.array([K.fx * X[0] / X[2] + K.cx, K.fy * X[1] / X[2] + K.cy])


def backproject(K: Intrinsics, u, d: float) -> np.ndarray:
    if not d > 0:
        raise NonPositiveDepth(f"depth must be positive, got {d}")
    u = np.asarray(u, dtype=float)
    return d * np.array([(u[0] - K.cx) / K.fx, (u[1] - K.cy) / K.fy, 1.0])


def sensor_rows_of(clock: ReadoutClock, lut: ScanlineLUT | None, shape) -> np.ndarray:
    """Sensor row (fractional) of every pixel in an image of ``shape``."""
    h, w = shape
    if lut is not None:
        if lut.shape != (h, w):
            raise ValueError(f"LUT shape {lut.shape} does not match image {shape}")
        return lut.table
    rows = np.arange(h, dtype=float) * clock.scale
    return np.broadcast_to(rows[:, None], (h, w))


def table_index(clock: ReadoutClock, lut: ScanlineLUT | None, shape) -> np.ndarray:
    """Fractional row-pose table index of every pixel.

    Table entry ``r`` sits at sensor row ``r * scale``; without a LUT this is
    exactly the image row.
    """
    h, w = shape
    if lut is None:
        return np.broadcast_to(np.arange(h, dtype=float)[:, None], (h, w))
    return np.clip(lut.table / clock.scale, 0.0, h - 1)


def row_time(clock: ReadoutClock, lut: ScanlineLUT | None, u) -> float:
    col, row = int(u[0]), int(u[1])
    if lut is not None:
        h, w = lut.shape
    else:
        h, w = clock.image_rows, None
    if row < 0 or row >= h or col < 0 or (w is not None and col >= w):
        raise OutOfBounds(f"pixel {tuple(u)} outside the image")
    sensor_row = lut(col, row) if lut is not None else row * clock.scale
    return clock.frame_start + sensor_row * clock.row_period
