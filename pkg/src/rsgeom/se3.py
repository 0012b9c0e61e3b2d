"""Rigid transforms, trajectories and cubic-spline pose interpolation.

A :class:`Pose` maps points from a source frame into a target frame,
``X_target = R @ X_source + t``. Names follow ``target_from_source``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from rsgeom import quaternion as quat
from rsgeom.errors import InsufficientSamples, QueryOutOfRange


@dataclass(frozen=True)
class Pose:
    rotation: np.ndarray = field(default_factory=lambda: quat.IDENTITY.copy())
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        q = quat.canonical(quat.normalize(np.asarray(self.rotation, dtype=float)))
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_matrix(cls, m) -> "Pose":
        m = np.asarray(m, dtype=float)
        return cls(quat.from_matrix(m[:3, :3]), m[:3, 3])

    @classmethod
    def from_rotvec(cls, rotvec, translation=(0.0, 0.0, 0.0)) -> "Pose":
        return cls(quat.from_rotvec(rotvec), translation)

    @property
    def R(self) -> np.ndarray:
        return quat.to_matrix(self.rotation)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.R
        m[:3, 3] = self.translation
        return m

    def almost_equal(self, other: "Pose", atol: float = 1e-9) -> bool:
        return (
            float(quat.angle_between(self.rotation, other.rotation)) <= atol
            and bool(np.allclose(self.translation, other.translation, rtol=0, atol=atol))
        )


def compose(a: Pose, b: Pose) -> Pose:
    """Apply ``b`` then ``a``."""
    q = quat.multiply(a.rotation, b.rotation)
    return Pose(q, a.R @ b.translation + a.translation)


def invert(p: Pose) -> Pose:
    qi = quat.conjugate(p.rotation)
    return Pose(qi, -(quat.to_matrix(qi) @ p.translation))


def transform_point(p: Pose, X) -> np.ndarray:
    return p.R @ np.asarray(X, dtype=float) + p.translation


def relative_pose(world_from_a: Pose, world_from_b: Pose) -> Pose:
    """Return ``a_from_b``."""
    return compose(invert(world_from_a), world_from_b)


@dataclass(frozen=True)
class Trajectory:
    """Timestamped poses (``world_from_camera``), strictly increasing in time."""

    timestamps: np.ndarray
    poses: tuple

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=float).reshape(-1)
        if len(ts) != len(self.poses):
            raise ValueError("timestamps and poses differ in length")
        if len(ts) > 1 and np.any(np.diff(ts) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "poses", tuple(self.poses))

    @classmethod
    def from_arrays(cls, timestamps, positions, quats_wxyz) -> "Trajectory":
        return cls(timestamps, [Pose(q, p) for p, q in zip(positions, quats_wxyz)])

    def __len__(self):
        return len(self.timestamps)

    @property
    def positions(self) -> np.ndarray:
        return np.array([p.translation for p in self.poses]).reshape(-1, 3)

    @property
    def quaternions(self) -> np.ndarray:
        return np.array([p.rotation for p in self.poses]).reshape(-1, 4)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.timestamps[0]), float(self.timestamps[-1])


class PoseSpline:
    """Natural cubic spline through the samples of a trajectory.

    Translation components are splined independently. Rotation is splined
    on the four quaternion components after hemisphere alignment and then
    renormalised. Queries landing exactly on a knot return the knot pose.
    """

    def __init__(self, traj: Trajectory):
        if len(traj) < 4:
            raise InsufficientSamples(
                f"cubic spline needs at least 4 samples, got {len(traj)}")
        self.times = traj.timestamps
        self._knot_t = traj.positions
        self._knot_q = quat.hemisphere_align(traj.quaternions)
        self._t = CubicSpline(self.times, self._knot_t, bc_type="natural")
        self._q = CubicSpline(self.times, self._knot_q, bc_type="natural")

    def _check(self, times):
        lo, hi = self.times[0], self.times[-1]
        bad = (times < lo) | (times > hi) | ~np.isfinite(times)
        if np.any(bad):
            raise QueryOutOfRange(
                f"query time {times[bad][0]!r} outside trajectory span [{lo}, {hi}]")

    def evaluate(self, query_times) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(quaternions (N,4), translations (N,3))``; quaternions are
        hemisphere-continuous, not canonicalised."""
        times = np.atleast_1d(np.asarray(query_times, dtype=float))
        self._check(times)
        trans = self._t(times)
        q = quat.normalize(self._q(times))
        idx = np.clip(np.searchsorted(self.times, times), 0, len(self.times) - 1)
        on_knot = self.times[idx] == times
        trans[on_knot] = self._knot_t[idx[on_knot]]
        q[on_knot] = quat.normalize(self._knot_q[idx[on_knot]])
        return q, trans

    def translation_derivative(self, query_times, order: int = 1) -> np.ndarray:
        times = np.atleast_1d(np.asarray(query_times, dtype=float))
        self._check(times)
        return self._t(times, order)


def interpolate_trajectory(traj: Trajectory, query_times: Sequence[float]) -> list[Pose]:
    q, t = PoseSpline(traj).evaluate(query_times)
    return [Pose(qi, ti) for qi, ti in zip(q, t)]


class RowPoseTable:
    """Per-row transforms ``row0_from_rowr`` stored as arrays.

    ``quats`` is (H, 4) in ``[w, x, y, z]`` order and ``translations`` is
    (H, 3) in meters. Fractional row indices are resolved by slerp on
    rotation and linear interpolation on translation.
    """

    def __init__(self, quats, translations):
        q = np.asarray(quats, dtype=float).reshape(-1, 4)
        t = np.asarray(translations, dtype=float).reshape(-1, 3)
        if len(q) != len(t):
            raise ValueError("rotation and translation tables differ in length")
        self.quats = quat.normalize(q) if len(q) else q
        self.translations = t
        self._matrices = quat.to_matrix(self.quats) if len(q) else np.zeros((0, 3, 3))

    @classmethod
    def from_poses(cls, poses: Sequence[Pose]) -> "RowPoseTable":
        if not poses:
            return cls(np.zeros((0, 4)), np.zeros((0, 3)))
        return cls([p.rotation for p in poses], [p.translation for p in poses])

    @classmethod
    def identity(cls, rows: int) -> "RowPoseTable":
        return cls(np.tile(quat.IDENTITY, (rows, 1)), np.zeros((rows, 3)))

    def __len__(self):
        return len(self.quats)

    def __getitem__(self, r) -> Pose:
        return Pose(self.quats[r], self.translations[r])

    def poses(self) -> list[Pose]:
        return [self[r] for r in range(len(self))]

    @property
    def matrices(self) -> np.ndarray:
        return self._matrices

    def lookup(self, index) -> tuple[np.ndarray, np.ndarray]:
        """Rotation matrices and translations at (possibly fractional) rows.

        Returns arrays shaped ``index.shape + (3, 3)`` and ``index.shape + (3,)``.
        """
        index = np.asarray(index, dtype=float)
        n = len(self)
        if n == 0:
            raise IndexError("empty row-pose table")
        if np.any(index < 0) or np.any(index > n - 1):
            raise IndexError("row index outside the table")
        whole = np.floor(index)
        if np.all(whole == index):
            i = index.astype(np.intp)
            return self._matrices[i], self.translations[i]
        if n == 1:
            i = np.zeros(index.shape, dtype=np.intp)
            return self._matrices[i], self.translations[i]
        i0 = np.minimum(whole.astype(np.intp), n - 2)
        frac = index - i0
        q = quat.slerp(self.quats[i0], self.quats[i0 + 1], frac)
        t = self.translations[i0] + frac[..., None] * (
            self.translations[i0 + 1] - self.translations[i0])
        R = quat.to_matrix(q)
        exact0 = frac == 0.0
        exact1 = frac == 1.0
        R[exact0] = self._matrices[i0[exact0]]
        t[exact0] = self.translations[i0[exact0]]
        R[exact1] = self._matrices[i0[exact1] + 1]
        t[exact1] = self.translations[i0[exact1] + 1]
        return R, t


def compose_arrays(a: Pose, R, t):
    """``a`` composed with batched transforms ``(R (..., 3, 3), t (..., 3))``."""
    Ra = a.R
    return np.einsum("ij,...jk->...ik", Ra, R), np.einsum("ij,...j->...i", Ra, t) + a.translation
