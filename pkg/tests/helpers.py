"""Scene generators and independent oracles shared by the test modules."""
import numpy as np

from rsgeom import quaternion as quat
from rsgeom.camera import Intrinsics, ReadoutClock
from rsgeom.geometry import DepthMap
from rsgeom.se3 import RowPoseTable

ROW_PERIOD = 29.4737e-6


def tum_like_camera(width=320, height=256, f=250.0):
    K = Intrinsics(f, f, (width - 1) / 2, (height - 1) / 2, width, height)
    clock = ReadoutClock(ROW_PERIOD, 4 * height, height)
    return K, clock


def texture(shape, rng):
    h, w = shape
    vv, uu = np.mgrid[0:h, 0:w].astype(float)
    img = np.full(shape, 128.0)
    for _ in range(4):
        fu, fv = rng.uniform(0.05, 0.4, 2)
        ph = rng.uniform(0, 2 * np.pi)
        img += 25 * np.sin(fu * uu + fv * vv + ph)
    return np.clip(img, 0, 255)


def plane_depth(K, rng):
    """Depth of a random tilted plane seen by the camera."""
    h, w = K.height, K.width
    vv, uu = np.mgrid[0:h, 0:w].astype(float)
    n = np.array([rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 1.0])
    c = rng.uniform(1.5, 4.0)
    ray = np.stack([(uu - K.cx) / K.fx, (vv - K.cy) / K.fy, np.ones_like(uu)], axis=-1)
    return DepthMap(c / (ray @ n))


def smooth_depth(K, rng):
    h, w = K.height, K.width
    vv, uu = np.mgrid[0:h, 0:w].astype(float)
    d = np.full((h, w), rng.uniform(2.0, 4.0))
    for _ in range(3):
        fu, fv = rng.uniform(0.005, 0.03, 2)
        d += rng.uniform(0.1, 0.4) * np.sin(fu * uu + rng.uniform(0, 6)) * np.cos(fv * vv + rng.uniform(0, 6))
    return DepthMap(d)


def polynomial_table(clock, rows, coeffs_rot, coeffs_trans):
    """Row table with rotation vector and translation given as polynomials
    in the row offset time (constant term zero)."""
    t = clock.image_row_offsets(rows)
    powers = np.stack([t ** (k + 1) for k in range(len(coeffs_rot))], axis=-1)
    rot = powers @ np.asarray(coeffs_rot)
    powers = np.stack([t ** (k + 1) for k in range(len(coeffs_trans))], axis=-1)
    trans = powers @ np.asarray(coeffs_trans)
    return RowPoseTable(quat.from_rotvec(rot), trans)


def random_smooth_table(clock, rows, rng, jerk=True):
    """Random motion with velocity, acceleration and (optionally) jerk."""
    n = 3 if jerk else 1
    scale_r = np.array([1.5, 30.0, 1000.0])[:n]
    scale_t = np.array([1.0, 20.0, 700.0])[:n]
    rot = rng.uniform(-1, 1, (n, 3)) * scale_r[:, None]
    trans = rng.uniform(-1, 1, (n, 3)) * scale_t[:, None]
    return polynomial_table(clock, rows, rot, trans)


def natural_spline_oracle(x, y, xq):
    """Natural cubic spline by an explicit tridiagonal (Thomas) solve."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = len(x) - 1
    h = np.diff(x)
    M = np.zeros(n + 1)
    if n > 1:
        a = h[:-1].copy()
        b = 2 * (h[:-1] + h[1:])
        c = h[1:].copy()
        d = 6 * ((y[2:] - y[1:-1]) / h[1:] - (y[1:-1] - y[:-2]) / h[:-1])
        m = n - 1
        for i in range(1, m):
            wgt = a[i] / b[i - 1]
            b[i] -= wgt * c[i - 1]
            d[i] -= wgt * d[i - 1]
        sol = np.zeros(m)
        sol[-1] = d[-1] / b[-1]
        for i in range(m - 2, -1, -1):
            sol[i] = (d[i] - c[i] * sol[i + 1]) / b[i]
        M[1:-1] = sol
    out = []
    for q in np.atleast_1d(xq):
        i = min(max(np.searchsorted(x, q) - 1, 0), n - 1)
        hi = h[i]
        A = (x[i + 1] - q) / hi
        B = (q - x[i]) / hi
        out.append(A * y[i] + B * y[i + 1]
                   + ((A ** 3 - A) * M[i] + (B ** 3 - B) * M[i + 1]) * hi * hi / 6)
    return np.array(out)


def dlt_triangulate(u_gs0, u_rs, R, t, K_rs, K_gs0):
    """Linear least-squares (DLT) triangulation in the RS frame."""
    P1 = K_rs.K @ np.hstack([np.eye(3), np.zeros((3, 1))])
    P2 = K_gs0.K @ np.hstack([R, np.reshape(t, (3, 1))])
    A = np.array([
        u_rs[0] * P1[2] - P1[0],
        u_rs[1] * P1[2] - P1[1],
        u_gs0[0] * P2[2] - P2[0],
        u_gs0[1] * P2[2] - P2[1],
    ])
    _, _, Vt = np.linalg.svd(A)
    X = Vt[-1]
    return X[:3] / X[3]


def random_pose(rng, max_angle=np.pi, max_t=2.0):
    from rsgeom.se3 import Pose
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return Pose.from_rotvec(axis * rng.uniform(0, max_angle), rng.uniform(-max_t, max_t, 3))


def world_trajectory(t0=0.0, t1=1.0, rate=100.0):
    """Smooth camera motion sampled like a motion-capture system."""
    from rsgeom.se3 import Trajectory
    t = np.arange(t0, t1 + 1e-9, 1.0 / rate)
    rv = np.stack([0.2 * np.sin(2 * t), 0.5 * t, 0.1 * np.cos(t)], axis=-1)
    pos = np.stack([0.5 * t, 0.1 * np.sin(3 * t), 0.05 * t ** 2], axis=-1)
    return Trajectory.from_arrays(t, pos, quat.from_rotvec(rv))


def write_camera_config(path, K, clock):
    with open(path, "w") as f:
        f.write(f"fx = {K.fx!r}\nfy = {K.fy!r}\ncx = {K.cx!r}\ncy = {K.cy!r}\n")
        f.write(f"width = {K.width}\nheight = {K.height}\n")
        f.write(f"row_period_us = {clock.row_period * 1e6!r}\nsensor_rows = {clock.sensor_rows}\n")


def make_sequence(root, frame_times, seed=0, K=None, clock=None, baseline=0.08, imu_span=None):
    """Synthetic stereo RS/GS0 sequence on disk.

    Returns ``(manifest_path, truths)`` where each truth holds the float64
    depth, row table, flows and synthesis map of one frame.
    """
    from pathlib import Path

    from rsgeom import fileio
    from rsgeom.dataset import row_pose_tables
    from rsgeom.se3 import Pose
    from rsgeom.synthesis import analytic_stereo_flow, synthesize_rs

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    if K is None:
        K, clock = tum_like_camera(64, 48, 60.0)
    rng = np.random.default_rng(seed)
    traj = world_trajectory()
    fileio.write_trajectory(root / "traj.txt", traj.timestamps, traj.poses)
    write_camera_config(root / "rs.cfg", K, clock)
    write_camera_config(root / "gs0.cfg", K, clock)
    stereo = Pose(translation=[baseline, 0, 0])
    truths = []
    lines = ["frame_id,timestamp,rs_image,flow_fwd,flow_bwd"]
    for i, ts in enumerate(frame_times):
        fid = f"f{i:03d}"
        table = row_pose_tables(traj, ts, clock)
        frame, gt = synthesize_rs(texture(K.shape, rng), smooth_depth(K, rng), table, K, clock)
        fwd, bwd = analytic_stereo_flow(frame, table, K, stereo)
        fileio.write_image(root / f"{fid}.png", frame.image)
        fileio.write_flo(root / f"{fid}_fwd.flo", np.nan_to_num(fwd, nan=1e4))
        fileio.write_flo(root / f"{fid}_bwd.flo", np.nan_to_num(bwd, nan=1e4))
        lines.append(f"{fid},{ts!r},{fid}.png,{fid}_fwd.flo,{fid}_bwd.flo")
        truths.append(dict(frame=frame, table=table, gt_map=gt, fwd=fwd, bwd=bwd))
    (root / "frames.csv").write_text("\n".join(lines) + "\n")
    cfg = ["sequence = synth", "frames = frames.csv", "trajectory = traj.txt",
           "rs_camera = rs.cfg", "gs0_camera = gs0.cfg",
           f"gs0_from_rs = {baseline!r} 0 0 0 0 0 1"]
    if imu_span is not None:
        t = np.arange(imu_span[0], imu_span[1] + 1e-9, 1 / 200.0)
        gyro = np.stack([np.sin(t), np.cos(t), 0.5 * t], axis=-1)
        fileio.write_imu_csv(root / "imu.csv", t, gyro, np.tile([0, 0, 9.81], (len(t), 1)))
        cfg += ["imu = imu.csv", "cam_from_imu = 0 0 0.7071067811865476 0.7071067811865476"]
    (root / "manifest.cfg").write_text("\n".join(cfg) + "\n")
    return root / "manifest.cfg", truths
