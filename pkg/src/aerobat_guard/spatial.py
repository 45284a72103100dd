"""Rotation and kinematics primitives.

Euler angles follow the Z-Y-X (yaw-pitch-roll) convention::

    R = Rz(yaw) @ Ry(pitch) @ Rx(roll)

so ``R`` maps body-frame vectors into the world frame.
"""
import numpy as np

from aerobat_guard._accel import kernel
from aerobat_guard._linalg import inv3

PITCH_LIMIT = 0.5 * np.pi


@kernel
def rot_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


@kernel
def rot_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


@kernel
def rot_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@kernel
def hat3(w):
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


@kernel
def cross3(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


@kernel
def newton_polar(R, iterations):
    """Polar factor by Newton iteration ``R <- (R + R^-T) / 2``; for near-rotations."""
    X = R.copy()
    for _ in range(iterations):
        Xi = inv3(X)
        X = 0.5 * (X + Xi.T)
    return X


@kernel
def polar_rotation(R):
    u, _, vt = np.linalg.svd(R)
    out = u @ vt
    if np.linalg.det(out) < 0.0:
        u[:, 2] = -u[:, 2]
        out = u @ vt
    return out


def euler_to_rotation(angles):
    """Rotation matrix for Z-Y-X Euler angles ``(roll, pitch, yaw)`` in radians.

    Raises:
        ValueError: if the pitch is at or beyond +-pi/2 or any angle is not finite.
    """
    roll, pitch, yaw = (float(v) for v in angles)
    if not np.all(np.isfinite([roll, pitch, yaw])):
        raise ValueError("Euler angles must be finite")
    if abs(pitch) >= PITCH_LIMIT:
        raise ValueError(f"pitch {pitch!r} is at the gimbal singularity (|pitch| >= pi/2)")
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def rotation_to_euler(R):
    """Inverse of :func:`euler_to_rotation`; returns ``(roll, pitch, yaw)``."""
    R = np.asarray(R, dtype=float)
    pitch = np.arcsin(np.clip(-R[2, 0], -1.0, 1.0))
    roll = np.arctan2(R[2, 1], R[2, 2])
    yaw = np.arctan2(R[1, 0], R[0, 0])
    return np.array([roll, pitch, yaw])


def hat(omega):
    """Skew-symmetric matrix with ``hat(w) @ v == cross(w, v)``."""
    w = np.asarray(omega, dtype=float)
    if w.shape != (3,):
        raise ValueError("angular velocity must be a 3-vector")
    return hat3(w)


def vee(S):
    S = np.asarray(S, dtype=float)
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def reorthonormalize(R, rank_tol=1e-8):
    """Nearest rotation to ``R`` in the Frobenius sense (polar factor).

    Meant for repairing integrator drift, i.e. inputs already close to SO(3).

    Raises:
        ValueError: if ``R`` is rank deficient.
    """
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise ValueError("expected a finite 3x3 matrix")
    sv = np.linalg.svd(R, compute_uv=False)
    if sv[-1] <= rank_tol * max(sv[0], 1.0):
        raise ValueError(f"cannot reorthonormalize a rank-deficient matrix (singular values {sv})")
    return polar_rotation(R.copy())


def orthonormality_error(R):
    R = np.asarray(R, dtype=float)
    return float(np.linalg.norm(R.T @ R - np.eye(3)))


def quat_to_rotation(q):
    """Rotation matrix from a unit quaternion ``(w, x, y, z)``."""
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def rotation_to_quat(R):
    """Unit quaternion ``(w, x, y, z)`` with non-negative scalar part."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    q /= np.linalg.norm(q)
    return q if q[0] >= 0 else -q
