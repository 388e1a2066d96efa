from __future__ import annotations

import numpy as np

from .model import Denoiser, predict_x0
from .schedule import DiffusionSchedule


def _batched(C: np.ndarray) -> tuple[np.ndarray, bool]:
    C = np.asarray(C, dtype=float)
    if C.ndim == 2:
        return C[None], True
    if C.ndim != 3:
        raise ValueError(f"condition must be (T, c) or (B, T, c), got {C.shape}")
    return C, False


def denoise_step(schedule: DiffusionSchedule, model: Denoiser, x_t, C, t: int, rng: np.random.Generator, clip=(0.0, 1.0)) -> np.ndarray:
    """One ancestral step x^t -> x^{t-1} using the predicted x^0 and the
    closed-form Gaussian posterior. At t == 1 the posterior mean is returned."""
    x0 = predict_x0(model, x_t, C, t).data
    if clip is not None:
        x0 = np.clip(x0, *clip)
    c0, ct, var = schedule.posterior(t)
    mean = c0 * x0 + ct * np.asarray(x_t)
    if t == 1:
        return mean
    return mean + np.sqrt(var) * rng.standard_normal(mean.shape)


def sample(schedule: DiffusionSchedule, model: Denoiser, C, seed: int = 0, clip=(0.0, 1.0)) -> np.ndarray:
    """Draw blendshape weights for condition window(s) ``C``."""
    Cb, single = _batched(C)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((Cb.shape[0], Cb.shape[1], model.config.m))
    for t in range(schedule.T, 0, -1):
        x = denoise_step(schedule, model, x, Cb, t, rng, clip)
    return x[0] if single else x
