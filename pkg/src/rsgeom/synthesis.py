"""Synthetic rolling-shutter frames and analytic stereo flow for testing."""
from __future__ import annotations

import numpy as np

from rsgeom.camera import MIN_DEPTH, Intrinsics, ReadoutClock, ScanlineLUT
from rsgeom.errors import DimensionMismatch
from rsgeom.geometry import (CoordinateMap, DepthMap, RsFrame, bilinear_sample,
                             pixel_poses, warp_pixels)
from rsgeom.se3 import Pose, RowPoseTable, compose_arrays


def synthesize_rs(gs_image, gs_depth: DepthMap, rowposes: RowPoseTable, K: Intrinsics,
                  clock: ReadoutClock, lut: ScanlineLUT | None = None,
                  max_iter: int = 10, tol_px: float = 1e-6):
    """Render the RS view of a scene given as a GS image + depth at the
    row-0 pose.

    For every RS pixel ``u`` captured under row pose ``T``, finds the GS
    pixel ``g`` whose 3-D point, moved by ``T^-1``, projects to ``u``. The
    fixed point ``g = warp(u, depth_rs(g), T)`` is iterated from ``g = u``.
    Pixels that do not converge, leave the GS image or hit invalid depth are
    marked invalid.

    Returns ``(RsFrame, gt_map)`` where ``gt_map`` is the exact RS->GS map.
    """
    gs_image = np.asarray(gs_image)
    h, w = K.height, K.width
    if gs_image.shape[:2] != (h, w) or gs_depth.shape != (h, w):
        raise DimensionMismatch("GS image/depth do not match the intrinsics")
    if len(rowposes) != h:
        raise DimensionMismatch(f"row-pose table has {len(rowposes)} rows, image has {h}")

    R, t = pixel_poses(rowposes, clock, lut, (h, w))
    # third row of R^T and of -R^T t: depth of a row-0 point in the row frame
    rz = np.swapaxes(R, -1, -2)[..., 2, :]
    tz = -np.sum(rz * t, axis=-1)

    depth_vals = np.where(gs_depth.valid, gs_depth.values, 0.0)
    depth_ok = gs_depth.valid.astype(float)
    both = np.stack([depth_vals, depth_ok], axis=-1)
    vv, uu = np.mgrid[0:h, 0:w].astype(float)
    gu, gv = uu.copy(), vv.copy()
    ok = np.ones((h, w), bool)
    converged = np.zeros((h, w), bool)
    d_rs = np.ones((h, w))
    for _ in range(max_iter):
        dm, inside = bilinear_sample(both, gu, gv)
        D, m = dm[..., 0], dm[..., 1]
        ok = inside & (m >= 1.0 - 1e-12) & (D > 0)
        D = np.where(ok, D, 1.0)
        z_rs = (rz[..., 0] * (D * (gu - K.cx) / K.fx) + rz[..., 1] * (D * (gv - K.cy) / K.fy)
                + rz[..., 2] * D + tz)
        ok &= z_rs > MIN_DEPTH
        d_rs = np.where(ok, z_rs, 1.0)
        nu, nv, nz = warp_pixels(uu, vv, d_rs, R, t, K)
        ok &= nz > MIN_DEPTH
        step = np.hypot(nu - gu, nv - gv)
        gu, gv = nu, nv
        converged = ok & (step < tol_px)
        if np.all(converged | ~ok):
            break

    m, inside = bilinear_sample(depth_ok, np.where(ok, gu, 0), np.where(ok, gv, 0))
    valid = converged & inside & (m >= 1.0 - 1e-12)
    coords = np.stack([gu, gv], axis=-1)
    coords[~valid] = np.nan
    gt_map = CoordinateMap(coords, valid, np.where(valid, nz, np.nan))

    if gs_image.ndim == 2:
        img, _ = bilinear_sample(gs_image.astype(float), np.where(valid, gu, 0), np.where(valid, gv, 0))
        img = np.where(valid, img, 0.0)
    else:
        img, _ = bilinear_sample(gs_image.astype(float), np.where(valid, gu, 0), np.where(valid, gv, 0))
        img = np.where(valid[..., None], img, 0.0)
    depth = DepthMap(np.where(valid, d_rs, 0.0), valid)
    frame = RsFrame(img, depth, K, clock, lut)
    return frame, gt_map


def analytic_stereo_flow(frame: RsFrame, rowposes: RowPoseTable, K_gs0: Intrinsics,
                         gs0_from_rs0: Pose, max_iter: int = 30, tol_px: float = 1e-9):
    """Exact RS->GS0 flow from known RS depth and row poses, plus a GS0->RS
    flow obtained by inverting it on the GS0 pixel grid.

    GS0 is assumed to be exposed at the instant of RS row 0, so the pose of
    GS0 relative to RS row ``r`` is ``gs0_from_rs0 * rowposes[r]``. Invalid
    entries are NaN.
    """
    h, w = frame.shape
    R, t = compose_arrays(gs0_from_rs0, *pixel_poses(rowposes, frame.clock, frame.lut, (h, w)))
    K = frame.intrinsics
    vv, uu = np.mgrid[0:h, 0:w].astype(float)
    d = np.where(frame.depth.valid, frame.depth.values, 1.0)
    X = np.stack([d * (uu - K.cx) / K.fx, d * (vv - K.cy) / K.fy, d], axis=-1)
    Y = np.einsum("...ij,...j->...i", R, X) + t
    ok = frame.depth.valid & (Y[..., 2] > MIN_DEPTH)
    z = np.where(ok, Y[..., 2], 1.0)
    fwd = np.stack([K_gs0.fx * Y[..., 0] / z + K_gs0.cx - uu,
                    K_gs0.fy * Y[..., 1] / z + K_gs0.cy - vv], axis=-1)
    fwd[~ok] = np.nan

    hg, wg = K_gs0.height, K_gs0.width
    gv, gu = np.mgrid[0:hg, 0:wg].astype(float)
    su, sv = gu.copy(), gv.copy()
    for _ in range(max_iter):
        f, inside = bilinear_sample(fwd, su, sv)
        nu = np.where(inside, gu - f[..., 0], np.nan)
        nv = np.where(inside, gv - f[..., 1], np.nan)
        step = np.hypot(nu - su, nv - sv)
        su, sv = nu, nv
        if np.all((step < tol_px) | ~np.isfinite(step)):
            break
    bwd = np.stack([su - gu, sv - gv], axis=-1)
    bad = ~np.isfinite(step) | (step >= 1e-3)
    bwd[bad] = np.nan
    return fwd, bwd
