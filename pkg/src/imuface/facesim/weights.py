from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter1d

STYLES = ("expression", "speech", "neutral")


def _sinusoids(rng, t, n, fmin, fmax):
    freqs = rng.uniform(fmin, fmax, n)
    phases = rng.uniform(0.0, 2 * np.pi, n)
    amps = rng.dirichlet(np.ones(n))
    return np.sum(amps[:, None] * np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None]), axis=0)


def _smoothed_noise(rng, T, sigma_frames):
    x = gaussian_filter1d(rng.standard_normal(T), sigma_frames, mode="reflect")
    sd = x.std()
    return x / sd if sd > 0 else x


def _bursts(rng, T, fps):
    """Envelope of raised plateaus (1-3 s) separated by rests (0.5-2 s)."""
    env = np.zeros(T)
    pos = int(rng.uniform(0.0, 1.0) * fps)
    while pos < T:
        length = int(rng.uniform(1.0, 3.0) * fps)
        env[pos : pos + length] = rng.uniform(0.5, 1.0)
        pos += length + int(rng.uniform(0.5, 2.0) * fps)
    return gaussian_filter1d(env, 0.3 * fps, mode="nearest")


def generate_synthetic_weights(
    m: int,
    T: int,
    seed: int = 0,
    style: str = "expression",
    fps: float = 60.0,
    channels=None,
) -> np.ndarray:
    """Deterministic smooth (T, m) blendshape weights in [0, 1].

    ``expression`` gates random-phase 0.2-3 Hz sinusoids with slow bursts;
    ``speech`` keeps every channel moving at 1-3 Hz; ``neutral`` is all zero.
    ``channels`` restricts activity to a subset of blendshapes (others stay 0).
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if style not in STYLES:
        raise ValueError(f"unknown style {style!r}; expected one of {STYLES}")
    W = np.zeros((T, m))
    if style == "neutral":
        return W
    rng = np.random.default_rng(seed)
    t = np.arange(T) / fps
    active = range(m) if channels is None else list(channels)
    for k in active:
        if style == "expression":
            s = _sinusoids(rng, t, 3, 0.2, 3.0)
            noise = _smoothed_noise(rng, T, 0.25 * fps)
            w = _bursts(rng, T, fps) * (0.55 + 0.3 * s) + 0.05 * noise
        else:
            s = _sinusoids(rng, t, 3, 1.0, 3.0)
            noise = _smoothed_noise(rng, T, 0.15 * fps)
            w = 0.3 + 0.2 * s + 0.06 * noise
        W[:, k] = w
    return np.clip(W, 0.0, 1.0)


def save_weights(W: np.ndarray, path: str | Path, names=None) -> None:
    W = np.atleast_2d(W)
    names = names or [f"w{k}" for k in range(W.shape[1])]
    np.savetxt(path, W, delimiter=",", header=",".join(names), comments="", fmt="%.17g")


def load_weights(path: str | Path) -> np.ndarray:
    W = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if not np.all(np.isfinite(W)):
        raise ValueError(f"{path}: non-finite weights")
    return W
