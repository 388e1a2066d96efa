from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SENSITIVITY_UNIT = 1e-3


def _frames(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[-1] != 3:
        raise ValueError(f"{name} must be (F, V, 3) or (V, 3), got {x.shape}")
    return x


def _vertex_errors(pred, gt) -> np.ndarray:
    p, g = _frames(pred, "pred"), _frames(gt, "gt")
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: pred {p.shape} vs gt {g.shape}")
    return np.linalg.norm(p - g, axis=-1)


def _pool(err: np.ndarray, pooling: str) -> tuple[float, float, np.ndarray]:
    trace = err.mean(axis=1)
    if pooling == "frame":
        return float(trace.mean()), float(trace.std()), trace
    if pooling == "vertex":
        return float(err.mean()), float(err.std()), trace
    raise ValueError(f"pooling must be 'frame' or 'vertex', got {pooling!r}")


def pve(pred, gt, pooling: str = "frame") -> tuple[float, float, np.ndarray]:
    """Per-vertex Euclidean error: (mean, std, per-frame mean trace).

    With ``pooling="frame"`` the std is taken across per-frame means; with
    ``"vertex"`` across every (frame, vertex) distance."""
    return _pool(_vertex_errors(pred, gt), pooling)


def pve_lmk(pred, gt, landmark_indices, pooling: str = "frame") -> tuple[float, float, np.ndarray]:
    idx = np.asarray(landmark_indices, dtype=int)
    if idx.size == 0:
        raise ValueError("landmark list is empty")
    p, g = _frames(pred, "pred"), _frames(gt, "gt")
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: pred {p.shape} vs gt {g.shape}")
    return _pool(np.linalg.norm(p[:, idx] - g[:, idx], axis=-1), pooling)


def mse_weights(pred, gt) -> float:
    p, g = np.asarray(pred, dtype=float), np.asarray(gt, dtype=float)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: pred {p.shape} vs gt {g.shape}")
    return float(np.mean((p - g) ** 2))


def placement_sensitivity(accels) -> float:
    """Variance of the acceleration magnitude, in units of 1e-3 (m/s^2)^2."""
    a = np.asarray(accels, dtype=float)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError(f"acceleration series must be (F, 3), got {a.shape}")
    if len(a) < 2:
        raise ValueError("placement_sensitivity needs at least 2 frames")
    return float(np.var(np.linalg.norm(a, axis=1)) / SENSITIVITY_UNIT)


def placement_table(seq, exclude=(0,)) -> list[tuple[int, float]]:
    """(sensor_id, sensitivity) for every sensor of an ImuSequence."""
    return [(s, placement_sensitivity(seq.accels[:, seq.column(s)])) for s in seq.sensor_ids if s not in exclude]


@dataclass
class EvalReport:
    pve_mean: float
    pve_std: float
    pve_lmk_mean: float
    pve_lmk_std: float
    mse: float
    pve_trace: np.ndarray
    pve_lmk_trace: np.ndarray
    mse_trace: np.ndarray

    @classmethod
    def compute(cls, pred_vertices, gt_vertices, landmark_indices, pred_w, gt_w, pooling: str = "frame") -> "EvalReport":
        pm, ps, pt = pve(pred_vertices, gt_vertices, pooling)
        lm, ls, lt = pve_lmk(pred_vertices, gt_vertices, landmark_indices, pooling)
        pw, gw = np.asarray(pred_w, dtype=float), np.asarray(gt_w, dtype=float)
        mse = mse_weights(pw, gw)
        if len(pw) != len(pt):
            raise ValueError(f"weights have {len(pw)} frames but meshes have {len(pt)}")
        return cls(pm, ps, lm, ls, mse, pt, lt, np.mean((pw - gw) ** 2, axis=1))

    def summary(self) -> dict:
        return {
            "pve_mean": self.pve_mean,
            "pve_std": self.pve_std,
            "pve_lmk_mean": self.pve_lmk_mean,
            "pve_lmk_std": self.pve_lmk_std,
            "mse": self.mse,
            "frames": len(self.pve_trace),
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2) + "\n")

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frame", "pve", "pve_lmk", "mse"])
            for i, row in enumerate(zip(self.pve_trace, self.pve_lmk_trace, self.mse_trace)):
                w.writerow([i, *(repr(float(v)) for v in row)])
