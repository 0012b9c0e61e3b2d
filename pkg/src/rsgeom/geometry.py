"""Projection machinery: the per-pixel warp, RS->GS correction maps,
two-view triangulation and the bi-directional flow check."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from rsgeom.camera import (MIN_DEPTH, Intrinsics, ReadoutClock, ScanlineLUT,
                           backproject, project, table_index)
from rsgeom.errors import DegenerateRays, DimensionMismatch, NegativeDepth
from rsgeom.se3 import Pose, RowPoseTable, transform_point

MIN_RAY_ANGLE = 1e-6
BORDER_SLACK = 1e-9


@dataclass
class DepthMap:
    values: np.ndarray
    valid: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        ok = np.isfinite(self.values) & (self.values > 0)
        self.valid = ok if self.valid is None else np.asarray(self.valid, bool) & ok

    @property
    def shape(self):
        return self.values.shape


@dataclass
class CoordinateMap:
    """Target pixel ``(u, v)`` per source pixel, plus validity.

    ``depth`` optionally holds the target-frame depth of each point, which
    the forward splatter uses as its z-buffer key.
    """

    coords: np.ndarray
    valid: np.ndarray
    depth: np.ndarray | None = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        self.valid = np.asarray(self.valid, dtype=bool) & np.all(np.isfinite(self.coords), axis=-1)

    @property
    def shape(self):
        return self.valid.shape

    @classmethod
    def identity(cls, shape) -> "CoordinateMap":
        h, w = shape
        vv, uu = np.mgrid[0:h, 0:w].astype(float)
        return cls(np.stack([uu, vv], axis=-1), np.ones((h, w), bool))


@dataclass
class RsFrame:
    image: np.ndarray
    depth: DepthMap
    intrinsics: Intrinsics
    clock: ReadoutClock
    lut: ScanlineLUT | None = None

    def __post_init__(self):
        shape = (self.intrinsics.height, self.intrinsics.width)
        if self.image.shape[:2] != shape or self.depth.shape != shape:
            raise DimensionMismatch(
                f"image {self.image.shape[:2]} / depth {self.depth.shape} vs intrinsics {shape}")
        if self.lut is not None and self.lut.shape != shape:
            raise DimensionMismatch(f"LUT {self.lut.shape} vs image {shape}")
        if self.clock.image_rows != shape[0]:
            raise DimensionMismatch(
                f"clock has {self.clock.image_rows} image rows, image has {shape[0]}")

    @property
    def shape(self):
        return self.depth.shape


@dataclass(frozen=True)
class Twist:
    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))
    linear: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        a = np.asarray(self.angular, dtype=float).reshape(3)
        v = np.asarray(self.linear, dtype=float).reshape(3)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(v))):
            raise ValueError("twist must be finite")
        object.__setattr__(self, "angular", a)
        object.__setattr__(self, "linear", v)


def warp_pixels(u, v, d, R, t, K: Intrinsics):
    """Vectorised ``K [R | t] (d K^-1 [u v 1])``.

    ``R`` broadcasts as ``(..., 3, 3)`` and ``t`` as ``(..., 3)``. Returns
    ``(u', v', z')``; callers must mask ``z' <= MIN_DEPTH``.
    """
    x = d * (u - K.cx) / K.fx
    y = d * (v - K.cy) / K.fy
    R = np.asarray(R)
    t = np.asarray(t)
    X = R[..., 0, 0] * x + R[..., 0, 1] * y + R[..., 0, 2] * d + t[..., 0]
    Y = R[..., 1, 0] * x + R[..., 1, 1] * y + R[..., 1, 2] * d + t[..., 1]
    z = R[..., 2, 0] * x + R[..., 2, 1] * y + R[..., 2, 2] * d + t[..., 2]
    safe = np.where(z > MIN_DEPTH, z, 1.0)
    return K.fx * X / safe + K.cx, K.fy * Y / safe + K.cy, z


def pi_project(u, d: float, T: Pose, K: Intrinsics) -> np.ndarray:
    """Warp one pixel with depth ``d`` through ``T`` and reproject."""
    X = transform_point(T, backproject(K, u, d))
    return project(K, X)


def correction_map(frame: RsFrame, rowposes: RowPoseTable) -> CoordinateMap:
    """Where every RS pixel lands in the frame of row 0."""
    h, w = frame.shape
    if len(rowposes) != h:
        raise DimensionMismatch(f"row-pose table has {len(rowposes)} rows, frame has {h}")
    R, t = pixel_poses(rowposes, frame.clock, frame.lut, (h, w))
    return _map_from_poses(frame.depth, frame.intrinsics, R, t)


def pixel_poses(rowposes: RowPoseTable, clock: ReadoutClock, lut: ScanlineLUT | None, shape):
    """Row pose of every pixel, broadcastable to ``shape + (3, 3)`` / ``(3,)``.

    Without a LUT each image row maps to one table entry, so per-row arrays
    shaped ``(H, 1, ...)`` are returned.
    """
    if lut is None:
        return rowposes.matrices[:, None], rowposes.translations[:, None]
    return rowposes.lookup(table_index(clock, lut, shape))


def _map_from_poses(depth: DepthMap, K: Intrinsics, R, t) -> CoordinateMap:
    h, w = depth.shape
    vv, uu = np.mgrid[0:h, 0:w].astype(float)
    d = np.where(depth.valid, depth.values, 1.0)
    u2, v2, z = warp_pixels(uu, vv, d, R, t, K)
    valid = depth.valid & (z > MIN_DEPTH)
    coords = np.stack([u2, v2], axis=-1)
    coords[~valid] = np.nan
    return CoordinateMap(coords, valid, np.where(valid, z, np.nan))


def _rays(u_gs0, u_rs, R, t, K_rs: Intrinsics, K_gs0: Intrinsics):
    u_rs = np.asarray(u_rs, dtype=float)
    u_gs0 = np.asarray(u_gs0, dtype=float)
    d1 = np.stack([(u_rs[..., 0] - K_rs.cx) / K_rs.fx,
                   (u_rs[..., 1] - K_rs.cy) / K_rs.fy,
                   np.ones(u_rs.shape[:-1])], axis=-1)
    g = np.stack([(u_gs0[..., 0] - K_gs0.cx) / K_gs0.fx,
                  (u_gs0[..., 1] - K_gs0.cy) / K_gs0.fy,
                  np.ones(u_gs0.shape[:-1])], axis=-1)
    Rt = np.swapaxes(R, -1, -2)
    # GS0 camera centre and ray direction, expressed in the RS-row frame
    c = -np.einsum("...ij,...j->...i", Rt, t)
    d2 = np.einsum("...ij,...j->...i", Rt, g)
    return d1, c, d2


def triangulate_many(u_gs0, u_rs, R, t, K_rs: Intrinsics, K_gs0: Intrinsics):
    """Vectorised midpoint triangulation.

    ``R, t`` describe ``gs0_from_rsrow`` per correspondence. Returns
    ``(X_rs (..., 3), residual (...), ok (...))`` where ``ok`` is False for
    near-parallel rays or points not in front of the RS camera.
    """
    d1, c, d2 = _rays(u_gs0, u_rs, R, t, K_rs, K_gs0)
    a = np.sum(d1 * d1, axis=-1)
    b = np.sum(d1 * d2, axis=-1)
    cc = np.sum(d2 * d2, axis=-1)
    # w0 = o1 - o2 with o1 = 0
    dd = np.sum(d1 * -c, axis=-1)
    e = np.sum(d2 * -c, axis=-1)
    denom = a * cc - b * b
    sin_angle = np.linalg.norm(np.cross(d1, d2), axis=-1) / np.sqrt(a * cc)
    parallel = sin_angle < MIN_RAY_ANGLE
    safe = np.where(parallel, 1.0, denom)
    s1 = (b * e - cc * dd) / safe
    s2 = (a * e - b * dd) / safe
    p1 = s1[..., None] * d1
    p2 = c + s2[..., None] * d2
    X = 0.5 * (p1 + p2)
    residual = np.linalg.norm(p1 - p2, axis=-1)
    ok = ~parallel & (X[..., 2] > 0)
    return X, residual, ok


def triangulate(u_gs0, u_rs, gs0_from_rsrow: Pose, K_rs: Intrinsics, K_gs0: Intrinsics):
    """Midpoint triangulation of one correspondence.

    Returns ``(X_rs, d_rs, residual)`` with ``X_rs`` in the RS-row frame and
    ``residual`` the closest distance between the two rays.
    """
    X, res, _ = triangulate_many(np.asarray(u_gs0, float), np.asarray(u_rs, float),
                                 gs0_from_rsrow.R, gs0_from_rsrow.translation, K_rs, K_gs0)
    d1, c, d2 = _rays(u_gs0, u_rs, gs0_from_rsrow.R, gs0_from_rsrow.translation, K_rs, K_gs0)
    sin_angle = np.linalg.norm(np.cross(d1, d2)) / (np.linalg.norm(d1) * np.linalg.norm(d2))
    if sin_angle < MIN_RAY_ANGLE:
        raise DegenerateRays(f"rays are parallel (sin angle {sin_angle:.3g})")
    if X[2] <= 0:
        raise NegativeDepth(f"triangulated depth {X[2]:.6g} is not positive")
    return X, float(X[2]), float(res)


def bilinear_sample(field_, x, y):
    """Bilinear lookup of ``field_`` (H, W) or (H, W, C) at float coordinates.

    Returns ``(values, inside)``; samples outside ``[0, W-1] x [0, H-1]``
    are zero and flagged False. Coordinates within ``BORDER_SLACK`` of the
    border are clamped in, so round-off does not drop edge pixels.
    """
    field_ = np.asarray(field_, dtype=float)
    h, w = field_.shape[:2]
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    e = BORDER_SLACK
    inside = (x >= -e) & (x <= w - 1 + e) & (y >= -e) & (y <= h - 1 + e)
    xs = np.clip(np.where(inside, x, 0.0), 0, w - 1)
    ys = np.clip(np.where(inside, y, 0.0), 0, h - 1)
    x0 = np.minimum(xs.astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(ys.astype(np.intp), max(h - 2, 0))
    fx = xs - x0
    fy = ys - y0
    dx = 1 if w > 1 else 0
    dy = w if h > 1 else 0
    i00 = y0 * w + x0
    channels = field_.reshape(h, w, -1)
    out = np.empty(x.shape + (channels.shape[2],))
    for c in range(channels.shape[2]):
        flat = np.ascontiguousarray(channels[..., c]).ravel()
        a = flat.take(i00)
        b = flat.take(i00 + dx)
        top = a + fx * (b - a)
        a = flat.take(i00 + dy)
        b = flat.take(i00 + dy + dx)
        bot = a + fx * (b - a)
        out[..., c] = np.where(inside, top + fy * (bot - top), 0.0)
    if field_.ndim == 2:
        out = out[..., 0]
    return out, inside


def bidirectional_filter(flow_fwd: np.ndarray, flow_bwd: np.ndarray, tol_px: float) -> np.ndarray:
    """Keep pixels whose forward flow, followed by the backward flow sampled
    at the landing point, returns within ``tol_px`` of the start."""
    flow_fwd = np.asarray(flow_fwd, dtype=float)
    flow_bwd = np.asarray(flow_bwd, dtype=float)
    if flow_fwd.shape != flow_bwd.shape or flow_fwd.ndim != 3 or flow_fwd.shape[-1] != 2:
        raise DimensionMismatch(f"flow shapes {flow_fwd.shape} and {flow_bwd.shape}")
    h, w = flow_fwd.shape[:2]
    vv, uu = np.mgrid[0:h, 0:w].astype(float)
    tx = uu + flow_fwd[..., 0]
    ty = vv + flow_fwd[..., 1]
    back, inside = bilinear_sample(flow_bwd, tx, ty)
    err = np.hypot(flow_fwd[..., 0] + back[..., 0], flow_fwd[..., 1] + back[..., 1])
    ok = inside & np.all(np.isfinite(flow_fwd), axis=-1) & (err <= tol_px)
    return ok
