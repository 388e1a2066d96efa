"""Sensor and coordinate calibration.

Magnetometer offset/scale estimation, neutral-relative rotations, alignment
of accelerations to the world frame and compensation of rigid head motion
through the auxiliary (behind-the-ear) sensor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geom import is_rotation, matrix_to_quat, quat_to_matrix
from .sequence import ImuSequence

AXES = "xyz"
ACC_HEAD_COMP_MODES = ("literal", "inverse")
CONVENTION = "world_to_sensor"


@dataclass(frozen=True)
class MagCalibration:
    offset: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        offset = np.asarray(self.offset, dtype=float).reshape(3)
        scale = np.asarray(self.scale, dtype=float).reshape(3)
        if not (np.all(np.isfinite(offset)) and np.all(np.isfinite(scale))):
            raise ValueError("magnetometer calibration must be finite")
        if np.any(scale <= 0.0):
            raise ValueError("magnetometer scale must be strictly positive")
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "scale", scale)

    @classmethod
    def identity(cls) -> "MagCalibration":
        return cls(np.zeros(3), np.ones(3))

    def to_dict(self) -> dict:
        return {"offset": self.offset.tolist(), "scale": self.scale.tolist()}


def filter_mag_outliers(samples: np.ndarray, k: float = 4.0) -> np.ndarray:
    """Drop samples farther than ``k`` median absolute deviations from the
    per-axis median on any axis. Axes with zero MAD are not filtered."""
    samples = np.asarray(samples, dtype=float)
    if np.isinf(k):
        return samples
    med = np.median(samples, axis=0)
    dev = np.abs(samples - med)
    mad = np.median(dev, axis=0)
    bad = (dev > k * mad) & (mad > 0.0)
    return samples[~bad.any(axis=1)]


def mag_calibrate(samples, outlier_k: float = 4.0) -> MagCalibration:
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("no magnetometer samples")
    if samples.ndim != 2 or samples.shape[1] != 3:
        raise ValueError(f"expected (N, 3) magnetometer samples, got {samples.shape}")
    kept = filter_mag_outliers(samples, outlier_k)
    if len(kept) < 2:
        raise ValueError(f"only {len(kept)} samples left after outlier filtering")
    hi = kept.max(axis=0)
    lo = kept.min(axis=0)
    span = hi - lo
    for k, s in enumerate(span):
        if s <= 0.0:
            raise ValueError(f"degenerate magnetometer axis {AXES[k]}: zero range")
    offset = (hi + lo) / 2.0
    scale = span.mean() / span
    return MagCalibration(offset, scale)


def apply_mag_calibration(c: MagCalibration, m) -> np.ndarray:
    return (np.asarray(m, dtype=float) - c.offset) * c.scale


@dataclass
class CalibrationProfile:
    """Neutral orientations (world-to-sensor, indexed by sensor id), the
    auxiliary sensor index and per-sensor magnetometer calibrations."""

    neutral: np.ndarray
    aux_index: int = 0
    mag: list[MagCalibration] = field(default_factory=list)

    def __post_init__(self):
        self.neutral = np.asarray(self.neutral, dtype=float).reshape(-1, 3, 3)
        n = len(self.neutral)
        if not 0 <= self.aux_index < n:
            raise ValueError(f"aux_index {self.aux_index} outside 0..{n - 1}")
        if not is_rotation(self.neutral):
            raise ValueError("neutral orientations must be proper rotations")
        if not self.mag:
            self.mag = [MagCalibration.identity() for _ in range(n)]
        if len(self.mag) != n:
            raise ValueError(f"{len(self.mag)} magnetometer calibrations for {n} sensors")

    @property
    def n_sensors(self) -> int:
        return len(self.neutral)

    def to_dict(self) -> dict:
        return {
            "aux_index": int(self.aux_index),
            "neutral": [R.reshape(9).tolist() for R in self.neutral],
            "mag": [m.to_dict() for m in self.mag],
            "convention": CONVENTION,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationProfile":
        if d.get("convention", CONVENTION) != CONVENTION:
            raise ValueError(f"unsupported rotation convention {d.get('convention')!r}")
        neutral = np.array(d["neutral"], dtype=float)
        if neutral.ndim != 2 or neutral.shape[1] != 9:
            raise ValueError("neutral must be a list of 9-element row-major matrices")
        mag = [MagCalibration(m["offset"], m["scale"]) for m in d.get("mag", [])]
        return cls(neutral.reshape(-1, 3, 3), int(d["aux_index"]), mag)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "CalibrationProfile":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _T(R: np.ndarray) -> np.ndarray:
    return np.swapaxes(R, -1, -2)


def relative_rotation(neutral: np.ndarray, raw: np.ndarray) -> np.ndarray:
    """R_rel = neutral^-1 @ raw (inverse of a rotation is its transpose)."""
    return _T(np.asarray(neutral, dtype=float)) @ np.asarray(raw, dtype=float)


def align_acceleration(raw_R: np.ndarray, a_raw) -> np.ndarray:
    """Express a sensor-frame acceleration in the world frame."""
    a = np.asarray(a_raw, dtype=float)
    return (_T(np.asarray(raw_R, dtype=float)) @ a[..., None])[..., 0]


def _check_mode(acc_head_comp: str) -> None:
    if acc_head_comp not in ACC_HEAD_COMP_MODES:
        raise ValueError(
            f"acc_head_comp must be one of {ACC_HEAD_COMP_MODES}, got {acc_head_comp!r}"
        )


def _compensate(rels, aligned, aux_col, acc_head_comp):
    # rels (..., S, 3, 3), aligned (..., S, 3)
    R0 = rels[..., aux_col : aux_col + 1, :, :]
    R0_inv = _T(R0)
    R_calib = R0_inv @ rels
    head = R0_inv if acc_head_comp == "literal" else R0
    a = (head @ aligned[..., None])[..., 0]
    R_calib[..., aux_col, :, :] = rels[..., aux_col, :, :]
    a[..., aux_col, :] = aligned[..., aux_col, :]
    return R_calib, a


def head_compensate_frame(
    profile: CalibrationProfile,
    rels,
    aligned,
    acc_head_comp: str = "literal",
):
    """Map one frame into the auxiliary sensor's frame.

    ``rels`` and ``aligned`` are indexed by sensor id (lists, arrays or dicts).
    Returns ``(R_calib, a)`` with the same indexing as arrays.
    """
    _check_mode(acc_head_comp)
    if isinstance(rels, dict):
        if profile.aux_index not in rels:
            raise KeyError(f"auxiliary sensor {profile.aux_index} missing from frame")
        return _compensate_keyed(profile, rels, aligned, acc_head_comp)
    rels = np.asarray(rels, dtype=float)
    aligned = np.asarray(aligned, dtype=float)
    if profile.aux_index >= len(rels):
        raise KeyError(f"auxiliary sensor {profile.aux_index} missing from frame")
    return _compensate(rels, aligned, profile.aux_index, acc_head_comp)


def _compensate_keyed(profile, rels: dict, aligned: dict, acc_head_comp):
    ids = sorted(rels)
    aux_col = ids.index(profile.aux_index)
    R, a = _compensate(
        np.array([rels[i] for i in ids], dtype=float),
        np.array([aligned[i] for i in ids], dtype=float),
        aux_col,
        acc_head_comp,
    )
    return {i: R[c] for c, i in enumerate(ids)}, {i: a[c] for c, i in enumerate(ids)}


def calibrate_sequence(
    profile: CalibrationProfile,
    raw: ImuSequence,
    acc_head_comp: str = "literal",
) -> ImuSequence:
    """Per-frame relative rotation, acceleration alignment and head
    compensation; orientations come back as canonical quaternions."""
    _check_mode(acc_head_comp)
    missing = [s for s in raw.sensor_ids if not 0 <= s < profile.n_sensors]
    if missing:
        raise KeyError(f"profile has no neutral orientation for sensors {missing}")
    if profile.aux_index not in raw.sensor_ids:
        raise KeyError(f"auxiliary sensor {profile.aux_index} missing from sequence")
    R_raw = quat_to_matrix(raw.quats)  # (F, S, 3, 3)
    neutral = profile.neutral[list(raw.sensor_ids)]  # (S, 3, 3)
    rels = relative_rotation(neutral[None], R_raw)
    aligned = align_acceleration(R_raw, raw.accels)
    R_calib, a = _compensate(rels, aligned, raw.column(profile.aux_index), acc_head_comp)
    return ImuSequence(
        matrix_to_quat(R_calib),
        a,
        raw.sensor_ids,
        raw.fps,
        raw.times_us.copy(),
        None if raw.flags is None else raw.flags.copy(),
    )
