"""Vectorised unit-quaternion helpers.

Quaternions are numpy arrays with the scalar part first, ``[w, x, y, z]``,
and a trailing axis of length 4 so every function broadcasts over leading
dimensions. Composition is the Hamilton product: ``R(a * b) = R(a) @ R(b)``.
"""
import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def normalize(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def canonical(q):
    """Flip sign so that w >= 0 (q and -q are the same rotation)."""
    q = np.asarray(q, dtype=float)
    sign = np.where(q[..., :1] < 0.0, -1.0, 1.0)
    return q * sign


def conjugate(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def multiply(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def to_matrix(q):
    q = np.asarray(q, dtype=float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    m = np.stack([
        1 - 2 * (yy + zz), 2 * (xy - wz), 2 * (xz + wy),
        2 * (xy + wz), 1 - 2 * (xx + zz), 2 * (yz - wx),
        2 * (xz - wy), 2 * (yz + wx), 1 - 2 * (xx + yy),
    ], axis=-1)
    return m.reshape(q.shape[:-1] + (3, 3))


def from_matrix(m):
    """Rotation matrix (3x3) to a canonical unit quaternion (Shepperd's method)."""
    m = np.asarray(m, dtype=float)
    tr = np.trace(m)
    diag = np.diag(m)
    k = int(np.argmax([tr, diag[0], diag[1], diag[2]]))
    if k == 0:
        s = 2.0 * np.sqrt(1.0 + tr)
        q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s,
             (m[1, 0] - m[0, 1]) / s]
    elif k == 1:
        s = 2.0 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s,
             (m[0, 2] + m[2, 0]) / s]
    elif k == 2:
        s = 2.0 * np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s,
             (m[1, 2] + m[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s,
             (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    return canonical(normalize(np.array(q)))


def from_rotvec(v):
    """Axis-angle vector (rad) to quaternion; exact at zero."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=-1, keepdims=True)
    half = 0.5 * theta
    # sin(half)/theta, with its Taylor series near zero
    small = theta < 1e-8
    safe = np.where(small, 1.0, theta)
    k = np.where(small, 0.5 - theta ** 2 / 48.0, np.sin(half) / safe)
    return np.concatenate([np.cos(half), k * v], axis=-1)


def to_rotvec(q):
    """Unit quaternion to axis-angle vector with angle in [0, pi]."""
    q = canonical(q)
    w = np.clip(q[..., :1], -1.0, 1.0)
    xyz = q[..., 1:]
    s = np.linalg.norm(xyz, axis=-1, keepdims=True)
    angle = 2.0 * np.arctan2(s, w)
    small = s < 1e-12
    k = np.where(small, 2.0 / np.where(small, w, 1.0), angle / np.where(small, 1.0, s))
    return k * xyz


def rotate(q, v):
    return np.einsum("...ij,...j->...i", to_matrix(q), np.asarray(v, dtype=float))


def angle_between(a, b):
    """Geodesic angle (rad) between two rotations."""
    a, b = normalize(a), normalize(b)
    sign = np.where(np.sum(a * b, axis=-1) < 0, -1.0, 1.0)[..., None]
    # atan2 form stays accurate for tiny angles, unlike arccos of the dot
    return 4.0 * np.arctan2(np.linalg.norm(a - sign * b, axis=-1),
                            np.linalg.norm(a + sign * b, axis=-1))


def hemisphere_align(qs):
    """Flip signs along the first axis so consecutive dots are non-negative."""
    qs = np.array(qs, dtype=float)
    for i in range(1, len(qs)):
        if np.dot(qs[i - 1], qs[i]) < 0.0:
            qs[i] = -qs[i]
    return qs


def slerp(a, b, frac):
    """Spherical interpolation, broadcasting over leading axes of a, b, frac."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    frac = np.asarray(frac, dtype=float)[..., None]
    dot = np.sum(a * b, axis=-1, keepdims=True)
    b = np.where(dot < 0.0, -b, b)
    dot = np.abs(dot)
    theta = np.arccos(np.clip(dot, -1.0, 1.0))
    sin_t = np.sin(theta)
    near = sin_t < 1e-10
    safe = np.where(near, 1.0, sin_t)
    wa = np.where(near, 1.0 - frac, np.sin((1.0 - frac) * theta) / safe)
    wb = np.where(near, frac, np.sin(frac * theta) / safe)
    return normalize(wa * a + wb * b)
