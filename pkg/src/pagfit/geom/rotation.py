"""Rotation utilities on SO(3): geodesic metric, log/exp maps, slerp, 6D encoding.

All functions take and return float64 numpy arrays. Rotations are 3x3
matrices acting on column vectors.
"""
from __future__ import annotations

import numpy as np

from ..errors import AntipodalRotationsError

_EPS = 1e-12


def check_rotation(r: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Validate that ``r`` is a proper rotation (orthonormal, det +1)."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {r.shape}")
    err = np.linalg.norm(r.T @ r - np.eye(3))
    if err > tol:
        raise ValueError(f"matrix is not orthonormal (||R^T R - I|| = {err:.3g})")
    if np.linalg.det(r) <= 0:
        raise ValueError("matrix has non-positive determinant")
    return r


def geodesic_distance(r1: np.ndarray, r2: np.ndarray) -> float:
    """Angular distance between two rotations, in [0, pi].

    Defined as arccos((trace(r1^T r2) - 1) / 2) with the argument clamped
    to [-1, 1] against round-off.
    """
    r1 = np.asarray(r1, dtype=np.float64)
    r2 = np.asarray(r2, dtype=np.float64)
    cos = (np.trace(r1.T @ r2) - 1.0) / 2.0
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


def axis_angle_to_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues formula for a unit ``axis`` and ``angle`` in radians."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    k = _skew(axis)
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def quaternion_from_matrix(r: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) with w >= 0 for a rotation matrix.

    Shepperd's method: branch on the largest of trace and diagonal entries,
    which stays accurate at every angle including half-turns.
    """
    r = np.asarray(r, dtype=np.float64)
    t = np.trace(r)
    if t > max(r[0, 0], r[1, 1], r[2, 2]):
        s = np.sqrt(1.0 + t) * 2.0
        q = np.array([0.25 * s,
                      (r[2, 1] - r[1, 2]) / s,
                      (r[0, 2] - r[2, 0]) / s,
                      (r[1, 0] - r[0, 1]) / s])
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        s = np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array([(r[2, 1] - r[1, 2]) / s,
                      0.25 * s,
                      (r[0, 1] + r[1, 0]) / s,
                      (r[0, 2] + r[2, 0]) / s])
    elif r[1, 1] >= r[2, 2]:
        s = np.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array([(r[0, 2] - r[2, 0]) / s,
                      (r[0, 1] + r[1, 0]) / s,
                      0.25 * s,
                      (r[1, 2] + r[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array([(r[1, 0] - r[0, 1]) / s,
                      (r[0, 2] + r[2, 0]) / s,
                      (r[1, 2] + r[2, 1]) / s,
                      0.25 * s])
    q = q / np.linalg.norm(q)
    return -q if q[0] < 0 else q


def so3_log(r: np.ndarray) -> np.ndarray:
    """Axis-angle vector (rotation vector) of a rotation matrix.

    Goes through the quaternion, which keeps both the angle and the axis
    accurate near the identity and near half-turns.
    """
    q = quaternion_from_matrix(r)
    v = q[1:]
    s = np.linalg.norm(v)
    if s < 1e-12:
        return 2.0 * v  # first-order: w ~ 2*v for tiny angles
    theta = 2.0 * np.arctan2(s, q[0])
    return v / s * theta


def so3_exp(w: np.ndarray) -> np.ndarray:
    """Rotation matrix from an axis-angle vector."""
    w = np.asarray(w, dtype=np.float64)
    theta = np.linalg.norm(w)
    if theta < 1e-12:
        return np.eye(3) + _skew(w)
    return axis_angle_to_matrix(w / theta, theta)


def slerp(r1: np.ndarray, r2: np.ndarray, alpha: float) -> np.ndarray:
    """Spherical linear interpolation from ``r1`` (alpha=0) to ``r2`` (alpha=1)."""
    r1 = np.asarray(r1, dtype=np.float64)
    r2 = np.asarray(r2, dtype=np.float64)
    return r1 @ so3_exp(alpha * so3_log(r1.T @ r2))


def slerp_midpoint(r1: np.ndarray, r2: np.ndarray, antipodal_tol: float = 1e-9) -> np.ndarray:
    """Geodesic midpoint of two rotations.

    Raises :class:`AntipodalRotationsError` when the rotations are a
    half-turn apart (distance pi), where the midpoint is not unique.
    """
    d = geodesic_distance(r1, r2)
    if np.pi - d < antipodal_tol:
        raise AntipodalRotationsError(
            f"rotations are {d:.9f} rad apart; midpoint is not unique at pi"
        )
    return slerp(r1, r2, 0.5)


def rotation_from_6d(v: np.ndarray) -> np.ndarray:
    """Decode a 6D rotation parameterization into a rotation matrix.

    The two 3-vectors are Gram-Schmidt orthonormalized into the first two
    columns; the third column is their cross product. Any pair of
    non-degenerate vectors decodes to a valid rotation (det +1).
    """
    v = np.asarray(v, dtype=np.float64).reshape(6)
    a, b = v[:3], v[3:]
    c1 = a / max(np.linalg.norm(a), _EPS)
    b_orth = b - np.dot(c1, b) * c1
    c2 = b_orth / max(np.linalg.norm(b_orth), _EPS)
    c3 = np.cross(c1, c2)
    return np.stack([c1, c2, c3], axis=1)


def rotation_to_6d(r: np.ndarray) -> np.ndarray:
    """Encode a rotation matrix as its first two columns (inverse of decode)."""
    r = np.asarray(r, dtype=np.float64)
    return np.concatenate([r[:, 0], r[:, 1]])


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation (via normalized quaternion)."""
    q = rng.normal(size=4)
    q = q / np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])
