"""Mesh evaluation and synthetic facial-IMU signals."""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..calib import CalibrationProfile
from ..geom import matrix_to_quat, quat_from_axis_angle, quat_to_matrix
from ..sequence import ImuSequence
from .rig import MENTALIS_SENSOR, Anchor, BlendshapeRig, DegenerateAnchorError

DENOMINATOR_MODES = ("squared", "paper_literal")
ORIENTATION_MODES = ("orthonormal", "paper_literal")
MM_TO_M = 1e-3
TRAJ_MAGIC = b"IMTR"


@dataclass
class MeshTrajectory:
    vertices: np.ndarray  # (F, V, 3) mm
    tau: float = 1.0 / 60.0

    @property
    def n_frames(self) -> int:
        return self.vertices.shape[0]

    def save(self, path: str | Path) -> None:
        F, V, _ = self.vertices.shape
        with open(path, "wb") as fh:
            fh.write(TRAJ_MAGIC + struct.pack("<HIId", 1, F, V, self.tau))
            for frame in self.vertices:
                fh.write(np.ascontiguousarray(frame, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "MeshTrajectory":
        blob = Path(path).read_bytes()
        if blob[:4] != TRAJ_MAGIC:
            raise ValueError(f"{path}: bad trajectory magic")
        version, F, V, tau = struct.unpack_from("<HIId", blob, 4)
        if version != 1:
            raise ValueError(f"{path}: unsupported trajectory version {version}")
        data = np.frombuffer(blob, dtype="<f4", offset=4 + struct.calcsize("<HIId"))
        return cls(data.reshape(F, V, 3).astype(float), tau)


@dataclass
class NoiseConfig:
    acc_std: float = 0.0  # m/s^2
    ori_std_deg: float = 0.0
    seed: int = 0


def evaluate_mesh(rig: BlendshapeRig, w) -> np.ndarray:
    """B_0 + sum_k w_k B_k for one weight row (or a (F, m) stack)."""
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != rig.m:
        raise ValueError(f"weight length {w.shape[-1]} does not match m={rig.m}")
    return rig.neutral_vertices + np.tensordot(w, rig.deltas, axes=([-1], [0]))


def trajectory_from_weights(rig: BlendshapeRig, W, head=None, fps: float = 60.0) -> MeshTrajectory:
    """Per-frame meshes; ``head`` (F, 3, 3) rotates each frame about the
    neutral mesh centroid."""
    verts = evaluate_mesh(rig, np.atleast_2d(W))
    if head is not None:
        head = np.asarray(head, dtype=float)
        if head.shape != (len(verts), 3, 3):
            raise ValueError(f"head rotations must be ({len(verts)}, 3, 3), got {head.shape}")
        c = rig.neutral_vertices.mean(axis=0)
        verts = np.einsum("fij,fvj->fvi", head, verts - c) + c
    return MeshTrajectory(verts, 1.0 / fps)


def _denominator(n: int, tau: float, mode: str) -> float:
    if mode == "squared":
        return (n * tau) ** 2
    if mode == "paper_literal":
        return n * tau
    raise ValueError(f"denominator mode must be one of {DENOMINATOR_MODES}, got {mode!r}")


def simulate_acceleration(traj: MeshTrajectory, vertex_id: int, j: int, n: int = 2, mode: str = "squared") -> np.ndarray:
    """Central second difference of one vertex at frame ``j``.

    Frames closer than ``n`` to either end have no centred stencil and return
    zeros; see :func:`boundary_mask`.
    """
    if n < 1:
        raise ValueError("smoothing constant n must be >= 1")
    V = traj.vertices.shape[1]
    if not 0 <= vertex_id < V:
        raise IndexError(f"vertex {vertex_id} outside 0..{V - 1}")
    den = _denominator(n, traj.tau, mode)
    F = traj.n_frames
    if j < n or j > F - 1 - n:
        return np.zeros(3)
    v = traj.vertices[:, vertex_id]
    return (v[j - n] + v[j + n] - 2.0 * v[j]) / den


def boundary_mask(F: int, n: int) -> np.ndarray:
    """True where frame has a full stencil."""
    valid = np.zeros(F, dtype=bool)
    valid[n : F - n] = True
    return valid


def simulate_accelerations(traj: MeshTrajectory, vertex_ids, n: int = 2, mode: str = "squared"):
    """Vectorized :func:`simulate_acceleration` for several vertices.

    Returns ``(acc (F, K, 3), valid (F,))`` in trajectory units per s^2.
    """
    if n < 1:
        raise ValueError("smoothing constant n must be >= 1")
    den = _denominator(n, traj.tau, mode)
    v = traj.vertices[:, list(vertex_ids)]
    F = len(v)
    acc = np.zeros_like(v)
    if F > 2 * n:
        acc[n : F - n] = (v[: F - 2 * n] + v[2 * n :] - 2.0 * v[n : F - n]) / den
    return acc, boundary_mask(F, n)


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def simulate_orientation(vertices: np.ndarray, anchor: Anchor, mode: str = "orthonormal") -> np.ndarray:
    """Sensor frame from the anchor triangle, as a matrix whose columns are the
    sensor axes in world coordinates (sensor-to-world).

    ``vertices`` may be one frame (V, 3) or a stack (F, V, 3).
    """
    vertices = np.asarray(vertices, dtype=float)
    p = vertices[..., anchor.vertex, :]
    e1 = _unit(p - vertices[..., anchor.support[0], :])
    e2 = _unit(p - vertices[..., anchor.support[1], :])
    c = np.cross(e1, e2)
    cn = np.linalg.norm(c, axis=-1, keepdims=True)
    if np.any(cn < 1e-9):
        raise DegenerateAnchorError(f"anchor for sensor {anchor.sensor_id} has collinear edges")
    nrm = c / cn
    if mode == "orthonormal":
        cols = [e1, np.cross(nrm, e1), nrm]
    elif mode == "paper_literal":
        third = np.cross(c, e2)
        cols = [e1, nrm, third / np.linalg.norm(third, axis=-1, keepdims=True)]
    else:
        raise ValueError(f"orientation mode must be one of {ORIENTATION_MODES}, got {mode!r}")
    return np.stack(cols, axis=-1)


def nearest_rotation(M: np.ndarray) -> np.ndarray:
    """Closest proper rotation in Frobenius norm (SVD projection)."""
    U, _, Vt = np.linalg.svd(M)
    d = np.sign(np.linalg.det(U @ Vt))
    d = np.where(d == 0, 1.0, d)
    U = U.copy()
    U[..., :, 2] *= d[..., None]
    return U @ Vt


def _world_to_sensor(frames: np.ndarray, mode: str) -> np.ndarray:
    if mode == "paper_literal":
        frames = nearest_rotation(frames)
    return np.swapaxes(frames, -1, -2)


def random_head_motion(T: int, seed: int = 0, max_deg: float = 20.0, fps: float = 60.0) -> np.ndarray:
    """Smooth head rotations (T, 3, 3): axis-angle components are sums of slow
    sinusoids; the first frame is the identity."""
    rng = np.random.default_rng(seed)
    t = np.arange(T) / fps
    rv = np.zeros((T, 3))
    for k in range(3):
        f = rng.uniform(0.05, 0.5, 2)
        ph = rng.uniform(0, 2 * np.pi, 2)
        a = rng.uniform(0.3, 1.0, 2)
        rv[:, k] = np.sum(a[:, None] * (np.sin(2 * np.pi * f[:, None] * t + ph[:, None]) - np.sin(ph[:, None])), axis=0)
    rv *= np.radians(max_deg) / max(np.abs(rv).max(), 1e-12)
    angle = np.linalg.norm(rv, axis=1)
    axis = np.where(angle[:, None] > 0, rv / np.where(angle > 0, angle, 1.0)[:, None], [0.0, 0.0, 1.0])
    return quat_to_matrix(quat_from_axis_angle(axis, angle))


def neutral_profile(rig: BlendshapeRig, orientation_mode: str = "orthonormal", aux_index: int = 0) -> CalibrationProfile:
    """Neutral (w = 0, identity head) world-to-sensor orientation per sensor id."""
    ids = rig.sensor_ids
    if ids != tuple(range(len(ids))):
        raise ValueError("profile requires contiguous sensor ids 0..S-1")
    frames = np.stack([simulate_orientation(rig.neutral_vertices, a, orientation_mode) for a in rig.anchors])
    return CalibrationProfile(_world_to_sensor(frames, orientation_mode), aux_index)


def simulate_sequence(
    rig: BlendshapeRig,
    W,
    head=None,
    n: int = 2,
    noise: NoiseConfig | None = None,
    denominator: str = "squared",
    orientation: str = "orthonormal",
    fps: float = 60.0,
    tap_frame: int | None = None,
    tap_magnitude: float = 30.0,
    tap_sensor: int = MENTALIS_SENSOR,
) -> tuple[ImuSequence, CalibrationProfile]:
    """Raw (uncalibrated) sensor signals for every rig anchor plus the neutral
    calibration profile.

    Orientations are world-to-sensor; accelerations are gravity-free, in m/s^2
    and expressed in the sensor frame. Frames without a centred stencil carry
    zero acceleration.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if len(W) < 2 * n + 1:
        raise ValueError(f"need at least {2 * n + 1} frames for smoothing constant n={n}")
    if orientation == "paper_literal":
        warnings.warn("paper_literal orientations are projected onto the nearest rotation", stacklevel=2)
    traj = trajectory_from_weights(rig, W, head, fps)
    anchors = rig.anchors
    frames = np.stack([simulate_orientation(traj.vertices, a, orientation) for a in anchors], axis=1)
    R_raw = _world_to_sensor(frames, orientation)  # (F, S, 3, 3)
    acc_world, _ = simulate_accelerations(traj, [a.vertex for a in anchors], n, denominator)
    acc_world = acc_world * MM_TO_M
    a_raw = (R_raw @ acc_world[..., None])[..., 0]

    noise = noise or NoiseConfig()
    if noise.acc_std > 0 or noise.ori_std_deg > 0:
        rng = np.random.default_rng(noise.seed)
        if noise.acc_std > 0:
            a_raw = a_raw + rng.normal(0.0, noise.acc_std, a_raw.shape)
        if noise.ori_std_deg > 0:
            axis = rng.standard_normal(R_raw.shape[:2] + (3,))
            angle = rng.normal(0.0, np.radians(noise.ori_std_deg), R_raw.shape[:2])
            R_raw = quat_to_matrix(quat_from_axis_angle(axis, angle)) @ R_raw

    ids = rig.sensor_ids
    if tap_frame is not None:
        col = ids.index(tap_sensor)
        a_raw = a_raw.copy()
        a_raw[tap_frame, col] += np.array([0.0, 0.0, tap_magnitude])

    seq = ImuSequence(matrix_to_quat(R_raw), a_raw, ids, fps)
    return seq, neutral_profile(rig, orientation)


def smile_clip(rig: BlendshapeRig, T: int, seed: int = 0, fps: float = 60.0) -> np.ndarray:
    """Weights that drive only the smile (zygomaticus) blendshapes."""
    from .weights import generate_synthetic_weights

    return generate_synthetic_weights(rig.m, T, seed, "expression", fps, channels=rig.channels("smile"))
