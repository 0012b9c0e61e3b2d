"""IMU ingestion, rotation into the camera frame, per-row resampling and a
gyro-only row-pose estimator.

The accelerometer channel is carried through and resampled but not used by
:func:`gyro_integrate_rowposes`: without a velocity and gravity estimate,
double integration of acceleration over one frame is not usable.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from rsgeom import quaternion as quat
from rsgeom.camera import ReadoutClock
from rsgeom.errors import AlreadyInCameraFrame, CoverageGap
from rsgeom.se3 import RowPoseTable


@dataclass(frozen=True)
class ImuSeries:
    timestamps: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray
    frame: str = "imu"

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=float).reshape(-1)
        g = np.asarray(self.gyro, dtype=float).reshape(-1, 3)
        a = np.asarray(self.accel, dtype=float).reshape(-1, 3)
        if not (len(ts) == len(g) == len(a)):
            raise ValueError("IMU columns differ in length")
        if len(ts) > 1 and np.any(np.diff(ts) <= 0):
            raise ValueError("IMU timestamps must be strictly increasing")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(a)) and np.all(np.isfinite(ts))):
            raise ValueError("IMU samples must be finite")
        if self.frame not in ("imu", "camera"):
            raise ValueError(f"unknown frame tag {self.frame!r}")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "gyro", g)
        object.__setattr__(self, "accel", a)

    def __len__(self):
        return len(self.timestamps)

    def covers(self, times) -> bool:
        times = np.asarray(times, dtype=float)
        return len(self) > 0 and bool(
            np.all(times >= self.timestamps[0]) and np.all(times <= self.timestamps[-1]))


def rotate_to_camera(series: ImuSeries, cam_from_imu) -> ImuSeries:
    """Express gyro and accelerometer vectors in the camera frame.

    ``cam_from_imu`` is a ``[w, x, y, z]`` quaternion.
    """
    if series.frame == "camera":
        raise AlreadyInCameraFrame("IMU series is already in the camera frame")
    R = quat.to_matrix(quat.normalize(cam_from_imu))
    return ImuSeries(series.timestamps, series.gyro @ R.T, series.accel @ R.T, "camera")


def _require_coverage(series: ImuSeries, times):
    if not series.covers(times):
        lo = series.timestamps[0] if len(series) else float("nan")
        hi = series.timestamps[-1] if len(series) else float("nan")
        raise CoverageGap(
            f"row times [{times.min():.9f}, {times.max():.9f}] not covered by IMU span [{lo}, {hi}]")


def _lerp(series_t, values, times):
    return np.stack([np.interp(times, series_t, values[:, k]) for k in range(values.shape[1])], axis=-1)


def per_row_interpolate(series: ImuSeries, clock: ReadoutClock, rows: int | None = None):
    """Linearly interpolated ``(gyro, accel)`` at every image-row time,
    each shaped (rows, 3)."""
    times = clock.image_row_times(rows)
    _require_coverage(series, times)
    return _lerp(series.timestamps, series.gyro, times), _lerp(series.timestamps, series.accel, times)


def integrate_rotation(omega: Callable[[np.ndarray], np.ndarray], times, substeps: int = 1) -> np.ndarray:
    """Midpoint-rule integration of body angular velocity.

    Returns quaternions (len(times), 4) of ``R(t0)^T R(t_k)``; each step is
    ``q <- q * exp(omega(t_mid) * dt)``, renormalised.
    """
    times = np.asarray(times, dtype=float)
    n = len(times)
    out = np.tile(quat.IDENTITY, (n, 1))
    if n < 2:
        return out
    frac = (np.arange(substeps) + 0.5) / substeps
    dt = np.diff(times)
    mids = times[:-1, None] + dt[:, None] * frac[None, :]
    w = np.asarray(omega(mids.ravel()), dtype=float).reshape(n - 1, substeps, 3)
    increments = quat.from_rotvec(w * (dt[:, None, None] / substeps))
    q = quat.IDENTITY.copy()
    for k in range(n - 1):
        for s in range(substeps):
            q = quat.multiply(q, increments[k, s])
        q = q / np.linalg.norm(q)
        out[k + 1] = q
    return out


def gyro_integrate_rowposes(series: ImuSeries, clock: ReadoutClock, rows: int | None = None,
                            bias=None, substeps: int = 1) -> RowPoseTable:
    """Rotation-only row-pose table from camera-frame gyro data.

    ``bias`` (rad/s), if given, is subtracted from every gyro sample.
    """
    if series.frame != "camera":
        raise ValueError("gyro integration expects an IMU series in the camera frame")
    times = clock.image_row_times(rows)
    _require_coverage(series, times)
    gyro = series.gyro if bias is None else series.gyro - np.asarray(bias, dtype=float)

    def omega(t):
        return _lerp(series.timestamps, gyro, t)

    q = integrate_rotation(omega, times, substeps)
    return RowPoseTable(q, np.zeros((len(times), 3)))
