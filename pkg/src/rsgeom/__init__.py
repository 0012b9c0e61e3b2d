"""Rolling-shutter geometry: row-wise pose models, RS synthesis and
correction, triangulation, IMU per-row processing, ground-truth generation
and evaluation metrics."""

from rsgeom.camera import (Intrinsics, ReadoutClock, ScanlineLUT, backproject,
                           build_identity_lut, project, row_time)
from rsgeom.errors import *  # noqa: F401,F403
from rsgeom.geometry import (CoordinateMap, DepthMap, RsFrame, Twist, bidirectional_filter,
                             correction_map, pi_project, triangulate)
from rsgeom.imu import (ImuSeries, gyro_integrate_rowposes, per_row_interpolate,
                        rotate_to_camera)
from rsgeom.metrics import (AteReport, EpeReport, RatioReport, ate_sim3, epe,
                            improvement_ratio)
from rsgeom.render import fill_holes, render_corrected
from rsgeom.rowposes import (constant_velocity_rowposes, fit_constant_velocity,
                             identity_rowposes)
from rsgeom.se3 import (Pose, RowPoseTable, Trajectory, compose, interpolate_trajectory,
                        invert, relative_pose, transform_point)
from rsgeom.synthesis import synthesize_rs

__version__ = "0.1.0"
