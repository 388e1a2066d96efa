"""Rotation algebra shared by every other module.

Conventions:
    - Quaternions are numpy arrays ``[w, x, y, z]`` (scalar first, Hamilton
      product). Every quaternion returned from this module is canonicalized
      so that ``w >= 0``.
    - Rotation matrices are 3x3 and denote the world-to-sensor transform:
      ``v_sensor = R @ v_world``.

All functions accept stacked inputs (``(..., 4)`` quaternions, ``(..., 3, 3)``
matrices) and are pure.
"""

from __future__ import annotations

import numpy as np

UNIT_TOL = 1e-6
ORTHO_TOL = 1e-6

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def canonicalize(q: np.ndarray) -> np.ndarray:
    """Flip sign so that w >= 0; for w == 0 the first non-zero vector
    component is made positive."""
    q = np.array(q, dtype=float, copy=True)
    flat = q.reshape(-1, 4)
    for row in flat:
        for c in row:
            if c > 0.0:
                break
            if c < 0.0:
                row *= -1.0
                break
    return flat.reshape(q.shape)


def _canonicalize_fast(q: np.ndarray) -> np.ndarray:
    # Vectorized path; falls back to the exhaustive rule only where w == 0.
    q = np.asarray(q, dtype=float)
    sign = np.where(q[..., 0] < 0.0, -1.0, 1.0)
    out = q * sign[..., None]
    zero_w = out[..., 0] == 0.0
    if np.any(zero_w):
        out = out.copy()
        out[zero_w] = canonicalize(out[zero_w])
    return out


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise ValueError("cannot normalize a zero quaternion")
    return _canonicalize_fast(q / n)


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_inverse(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return quat_conjugate(q) / np.sum(q * q, axis=-1, keepdims=True)


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product ``a ⊗ b`` (sign-canonicalized)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    out = np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )
    return _canonicalize_fast(out)


def quat_from_axis_angle(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    angle = np.asarray(angle, dtype=float)
    n = np.linalg.norm(axis, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise ValueError("rotation axis must be non-zero")
    half = 0.5 * angle[..., None]
    q = np.concatenate([np.cos(half), np.sin(half) * axis / n], axis=-1)
    return _canonicalize_fast(q)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != 4:
        raise ValueError(f"quaternion must have 4 components, got shape {q.shape}")
    n = np.linalg.norm(q, axis=-1)
    if not np.all(np.isfinite(q)) or np.any(np.abs(n - 1.0) > UNIT_TOL):
        raise ValueError(f"non-unit quaternion (norm {np.max(np.abs(n - 1.0)) + 1.0:.9g})")
    w, x, y, z = np.moveaxis(q / n[..., None], -1, 0)
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[..., 0, 1] = 2.0 * (x * y - w * z)
    R[..., 0, 2] = 2.0 * (x * z + w * y)
    R[..., 1, 0] = 2.0 * (x * y + w * z)
    R[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[..., 1, 2] = 2.0 * (y * z - w * x)
    R[..., 2, 0] = 2.0 * (x * z - w * y)
    R[..., 2, 1] = 2.0 * (y * z + w * x)
    R[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return R


def is_rotation(R: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape[-2:] != (3, 3) or not np.all(np.isfinite(R)):
        return False
    eye = np.eye(3)
    err = np.abs(np.swapaxes(R, -1, -2) @ R - eye).max(axis=(-2, -1))
    return bool(np.all(err < tol) and np.all(np.linalg.det(R) > 0.0))


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Shepperd's method; output canonicalized with w >= 0."""
    R = np.asarray(R, dtype=float)
    if not is_rotation(R):
        raise ValueError("input is not a proper rotation matrix")
    batch = R.shape[:-2]
    m = R.reshape(-1, 3, 3)
    q = np.empty((m.shape[0], 4))
    tr = m[:, 0, 0] + m[:, 1, 1] + m[:, 2, 2]
    diag = np.stack([tr, m[:, 0, 0], m[:, 1, 1], m[:, 2, 2]], axis=1)
    pick = np.argmax(diag, axis=1)

    i = pick == 0
    s = 2.0 * np.sqrt(1.0 + tr[i])
    q[i] = np.stack(
        [0.25 * s, (m[i, 2, 1] - m[i, 1, 2]) / s, (m[i, 0, 2] - m[i, 2, 0]) / s, (m[i, 1, 0] - m[i, 0, 1]) / s],
        axis=1,
    )
    i = pick == 1
    s = 2.0 * np.sqrt(1.0 + m[i, 0, 0] - m[i, 1, 1] - m[i, 2, 2])
    q[i] = np.stack(
        [(m[i, 2, 1] - m[i, 1, 2]) / s, 0.25 * s, (m[i, 0, 1] + m[i, 1, 0]) / s, (m[i, 0, 2] + m[i, 2, 0]) / s],
        axis=1,
    )
    i = pick == 2
    s = 2.0 * np.sqrt(1.0 - m[i, 0, 0] + m[i, 1, 1] - m[i, 2, 2])
    q[i] = np.stack(
        [(m[i, 0, 2] - m[i, 2, 0]) / s, (m[i, 0, 1] + m[i, 1, 0]) / s, 0.25 * s, (m[i, 1, 2] + m[i, 2, 1]) / s],
        axis=1,
    )
    i = pick == 3
    s = 2.0 * np.sqrt(1.0 - m[i, 0, 0] - m[i, 1, 1] + m[i, 2, 2])
    q[i] = np.stack(
        [(m[i, 1, 0] - m[i, 0, 1]) / s, (m[i, 0, 2] + m[i, 2, 0]) / s, (m[i, 1, 2] + m[i, 2, 1]) / s, 0.25 * s],
        axis=1,
    )
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return _canonicalize_fast(q).reshape(batch + (4,))


def slerp(a: np.ndarray, b: np.ndarray, t) -> np.ndarray:
    """Spherical interpolation; ``t`` broadcasts against the quaternion batch."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t = np.asarray(t, dtype=float)[..., None]
    dot = np.sum(a * b, axis=-1, keepdims=True)
    b = np.where(dot < 0.0, -b, b)
    dot = np.abs(dot)
    near = dot > 0.9995
    theta = np.arccos(np.clip(dot, -1.0, 1.0))
    sin_theta = np.where(near, 1.0, np.sin(theta))
    wa = np.where(near, 1.0 - t, np.sin((1.0 - t) * theta) / sin_theta)
    wb = np.where(near, t, np.sin(t * theta) / sin_theta)
    out = wa * a + wb * b
    return quat_normalize(out)


def quat_angle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rotation angle (radians) between two orientations."""
    dot = np.abs(np.sum(np.asarray(a) * np.asarray(b), axis=-1))
    return 2.0 * np.arccos(np.clip(dot, 0.0, 1.0))


def rotation_about(axis, angle) -> np.ndarray:
    return quat_to_matrix(quat_from_axis_angle(axis, angle))


def random_quats(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniformly distributed unit quaternions."""
    q = rng.standard_normal((n, 4))
    return quat_normalize(q)
