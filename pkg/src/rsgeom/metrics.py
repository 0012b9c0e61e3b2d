"""Evaluation metrics: end-point error, improvement ratio and ATE after
Sim(3) alignment."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from rsgeom.errors import DegenerateGeometry, DimensionMismatch, EmptyOverlap, LengthMismatch
from rsgeom.geometry import CoordinateMap
from rsgeom.se3 import Trajectory


@dataclass
class EpeReport:
    mean_px: float
    median_px: float
    valid_count: int
    max_px: float = 0.0
    per_frame: list = field(default_factory=list)


def epe_per_pixel(pred: CoordinateMap, gt: CoordinateMap) -> tuple[np.ndarray, np.ndarray]:
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"prediction {pred.shape} vs ground truth {gt.shape}")
    both = pred.valid & gt.valid
    err = np.full(pred.shape, np.nan)
    diff = pred.coords[both] - gt.coords[both]
    err[both] = np.sqrt(np.sum(diff * diff, axis=-1))
    return err, both


def epe(pred: CoordinateMap, gt: CoordinateMap) -> EpeReport:
    """Mean Euclidean distance over pixels valid in both maps."""
    err, both = epe_per_pixel(pred, gt)
    n = int(both.sum())
    if n == 0:
        raise EmptyOverlap("no pixel is valid in both maps")
    e = err[both]
    return EpeReport(float(e.mean()), float(np.median(e)), n, float(e.max()))


def aggregate_epe(reports: Sequence[EpeReport]) -> EpeReport:
    """Mean of per-frame mean EPEs (each frame weighted equally)."""
    if not reports:
        raise EmptyOverlap("no frames to aggregate")
    means = np.array([r.mean_px for r in reports])
    return EpeReport(float(means.mean()), float(np.median(means)),
                     int(sum(r.valid_count for r in reports)), float(means.max()),
                     per_frame=list(means))


@dataclass
class RatioReport:
    improved_count: int
    total: int

    @property
    def ratio(self) -> float:
        return self.improved_count / self.total if self.total else 0.0


def improvement_ratio(epe_in: Sequence[float], epe_out: Sequence[float]) -> RatioReport:
    """Count frames whose EPE strictly decreased; ties are not improvements."""
    a = np.asarray(epe_in, dtype=float)
    b = np.asarray(epe_out, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch(f"{a.size} input EPEs vs {b.size} output EPEs")
    return RatioReport(int(np.sum(b < a)), int(a.size))


@dataclass
class Sim3:
    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, points) -> np.ndarray:
        return self.scale * np.asarray(points) @ self.rotation.T + self.translation


@dataclass
class AteReport:
    rmse_m: float
    alignment: Sim3
    pairs: int
    residuals: np.ndarray = None


def align_umeyama(source, target) -> Sim3:
    """Similarity minimising ``sum |target - (s R source + t)|^2``."""
    X = np.asarray(source, dtype=float)
    Y = np.asarray(target, dtype=float)
    n = len(X)
    if n < 3:
        raise DegenerateGeometry(f"need at least 3 point pairs, got {n}")
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - mx, Y - my
    sx = np.linalg.svd(Xc, compute_uv=False)
    sy = np.linalg.svd(Yc, compute_uv=False)
    if sx[1] <= 1e-9 * max(sx[0], 1e-300) or sy[1] <= 1e-9 * max(sy[0], 1e-300):
        raise DegenerateGeometry("points are collinear or coincident")
    cov = Yc.T @ Xc / n
    U, D, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    var_x = np.sum(Xc * Xc) / n
    s = float(np.trace(np.diag(D) @ S) / var_x)
    t = my - s * R @ mx
    return Sim3(s, R, t)


def associate(est_times, gt_times, tolerance: float):
    """Pair each estimate with the nearest ground-truth timestamp within
    ``tolerance`` seconds. Returns index arrays ``(est_idx, gt_idx)``."""
    est_times = np.asarray(est_times, dtype=float)
    gt_times = np.asarray(gt_times, dtype=float)
    if len(gt_times) == 0 or len(est_times) == 0:
        return np.zeros(0, np.intp), np.zeros(0, np.intp)
    j = np.clip(np.searchsorted(gt_times, est_times), 1, len(gt_times) - 1) if len(gt_times) > 1 \
        else np.zeros(len(est_times), np.intp)
    if len(gt_times) > 1:
        left = j - 1
        pick_left = np.abs(est_times - gt_times[left]) <= np.abs(gt_times[j] - est_times)
        j = np.where(pick_left, left, j)
    ok = np.abs(gt_times[j] - est_times) <= tolerance
    return np.flatnonzero(ok), j[ok]


def ate_sim3(est: Trajectory, gt: Trajectory, tolerance: float = 0.025) -> AteReport:
    """RMSE of position residuals after aligning ``est`` onto ``gt``.

    The recovered :class:`Sim3` maps estimate coordinates into the
    ground-truth frame, so an estimate that is ``gt`` scaled by 2 yields
    ``scale == 0.5``.
    """
    ei, gi = associate(est.timestamps, gt.timestamps, tolerance)
    if len(ei) < 3:
        raise DegenerateGeometry(f"only {len(ei)} associated pose pairs")
    P = est.positions[ei]
    Q = gt.positions[gi]
    sim = align_umeyama(P, Q)
    res = np.linalg.norm(sim.apply(P) - Q, axis=1)
    return AteReport(float(np.sqrt(np.mean(res ** 2))), sim, len(ei), res)
