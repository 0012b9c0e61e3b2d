"""Baseline row-pose models: no correction, constant velocity, and a
least-squares constant-velocity fit to an existing table."""
from __future__ import annotations

import numpy as np

from rsgeom import quaternion as quat
from rsgeom.camera import ReadoutClock
from rsgeom.geometry import Twist
from rsgeom.se3 import RowPoseTable


def identity_rowposes(rows: int) -> RowPoseTable:
    return RowPoseTable.identity(rows)


def constant_velocity_rowposes(v: Twist, clock: ReadoutClock, rows: int | None = None) -> RowPoseTable:
    """Row ``r`` gets rotation ``exp(angular * t_r)`` and translation
    ``linear * t_r`` where ``t_r`` is the readout offset from row 0."""
    offsets = clock.image_row_offsets(rows)
    q = quat.from_rotvec(offsets[:, None] * v.angular)
    t = offsets[:, None] * v.linear
    return RowPoseTable(q, t)


def fit_constant_velocity(table: RowPoseTable, clock: ReadoutClock) -> Twist:
    """Twist whose constant-velocity table best matches ``table``.

    Least squares through the origin on rotation vectors and translations
    against the row offsets.
    """
    offsets = clock.image_row_offsets(len(table))
    denom = float(np.dot(offsets, offsets))
    if denom == 0.0:
        return Twist()
    rotvecs = quat.to_rotvec(table.quats)
    angular = offsets @ rotvecs / denom
    linear = offsets @ table.translations / denom
    return Twist(angular, linear)
