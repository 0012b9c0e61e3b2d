"""Forward splatting of corrected pixels and radius-limited hole filling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rsgeom.errors import DimensionMismatch
from rsgeom.geometry import CoordinateMap, RsFrame


@dataclass
class SplatResult:
    image: np.ndarray
    filled: np.ndarray
    source: np.ndarray   # flat row-major index of the winning source pixel, -1 for holes
    depth: np.ndarray

    @property
    def holes(self) -> np.ndarray:
        return ~self.filled


def render_corrected(frame: RsFrame, cmap: CoordinateMap) -> SplatResult:
    """Splat every valid source pixel onto its rounded target.

    Conflicts are resolved by smallest target depth, then by source
    row-major order, so the output does not depend on evaluation order.
    Targets nobody lands on are holes.
    """
    if cmap.shape != frame.shape:
        raise DimensionMismatch(f"map {cmap.shape} vs frame {frame.shape}")
    h, w = frame.shape
    image = np.asarray(frame.image)
    depth = cmap.depth if cmap.depth is not None else np.where(
        frame.depth.valid, frame.depth.values, np.inf)

    tu = np.rint(np.where(cmap.valid, cmap.coords[..., 0], -1.0))
    tv = np.rint(np.where(cmap.valid, cmap.coords[..., 1], -1.0))
    keep = cmap.valid & (tu >= 0) & (tu < w) & (tv >= 0) & (tv < h)
    src = np.flatnonzero(keep)
    target = (tv.ravel()[src] * w + tu.ravel()[src]).astype(np.intp)
    z = np.asarray(depth, dtype=float).ravel()[src]
    # z-buffer: nearest depth per target, ties broken by smallest source index
    zbuf = np.full(h * w, np.inf)
    np.minimum.at(zbuf, target, z)
    cand = z == zbuf[target]
    source = np.full(h * w, h * w, dtype=np.intp)
    np.minimum.at(source, target[cand], src[cand])
    filled = source < h * w
    source[~filled] = -1
    zbuf[~filled] = np.nan

    flat = (h * w,) + image.shape[2:]
    out = np.zeros(flat, dtype=float)
    out[filled] = image.reshape(flat)[source[filled]]
    out = out.reshape((h, w) + image.shape[2:])
    return SplatResult(out, filled.reshape(h, w), source.reshape(h, w), zbuf.reshape(h, w))


def fill_holes(image, filled, radius_px: float = 3.0):
    """Inverse-distance-weighted fill of holes from filled pixels within
    ``radius_px``. Returns ``(dense, still_holes)``."""
    if radius_px < 1:
        raise ValueError("radius must be at least 1 px")
    image = np.asarray(image, dtype=float)
    filled = np.asarray(filled, dtype=bool)
    h, w = filled.shape
    r = int(np.floor(radius_px))
    extra = image.shape[2:]
    pad = ((r, r), (r, r)) + ((0, 0),) * len(extra)
    vals = np.pad(np.where(filled.reshape(filled.shape + (1,) * len(extra)), image, 0.0), pad)
    mask = np.pad(filled, r)

    hy, hx = np.nonzero(~filled)
    num = np.zeros((len(hy),) + extra)
    den = np.zeros(len(hy))
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            dist = np.hypot(dx, dy)
            if dist == 0 or dist > radius_px:
                continue
            yy, xx = hy + r + dy, hx + r + dx
            wgt = mask[yy, xx] / dist
            den += wgt
            num += wgt.reshape(wgt.shape + (1,) * len(extra)) * vals[yy, xx]

    out = np.where(filled.reshape(filled.shape + (1,) * len(extra)), image, 0.0)
    ok = den > 0
    out[hy[ok], hx[ok]] = num[ok] / den[ok].reshape((-1,) + (1,) * len(extra))
    still = np.zeros((h, w), bool)
    still[hy[~ok], hx[~ok]] = True
    return out, still
