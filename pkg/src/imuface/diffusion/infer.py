from __future__ import annotations

import numpy as np

from .model import Denoiser
from .sampler import sample
from .schedule import DiffusionSchedule


def window_starts(n: int, window: int, overlap: int) -> list[int]:
    """Window start frames with stride ``window - overlap``; the last window is
    right-aligned so it ends exactly at ``n``."""
    if window < 1 or not 0 <= overlap < window:
        raise ValueError(f"need window >= 1 and 0 <= overlap < window, got {window}, {overlap}")
    if n <= window:
        return [0]
    stride = window - overlap
    starts = list(range(0, n - window + 1, stride))
    if starts[-1] != n - window:
        starts.append(n - window)
    return starts


def crossfade(windows: np.ndarray, starts: list[int], n: int) -> np.ndarray:
    """Stitch (K, T, m) windows into (n, m). Each new window fades in linearly
    over the frames it shares with what has been written so far."""
    K, T, m = windows.shape
    out = np.zeros((n, m))
    written = 0
    for k, s in enumerate(starts):
        w = windows[k][: max(0, min(T, n - s))]
        L = max(0, written - s)
        if L:
            ramp = np.linspace(0.0, 1.0, L)[:, None] if L > 1 else np.full((1, 1), 0.5)
            out[s : s + L] = (1.0 - ramp) * out[s : s + L] + ramp * w[:L]
        out[s + L : s + len(w)] = w[L:]
        written = max(written, s + len(w))
    return out


def windowed_inference(
    schedule: DiffusionSchedule,
    model: Denoiser,
    C: np.ndarray,
    window: int | None = None,
    overlap: int | None = None,
    seed: int = 0,
    batch: int = 64,
) -> np.ndarray:
    """Weights for a full (N, c) condition sequence."""
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or len(C) == 0:
        raise ValueError(f"condition must be a non-empty (N, c) array, got {C.shape}")
    window = window or model.config.window
    overlap = window // 2 if overlap is None else overlap
    n = len(C)
    if n < window:
        pad = np.repeat(C[-1:], window - n, axis=0)
        Cp = np.concatenate([C, pad])
    else:
        Cp = C
    starts = window_starts(len(Cp), window, overlap)
    stack = np.stack([Cp[s : s + window] for s in starts])
    outs = [sample(schedule, model, stack[i : i + batch], seed=seed + i) for i in range(0, len(stack), batch)]
    W = crossfade(np.concatenate(outs), starts, len(Cp))
    return W[:n]
