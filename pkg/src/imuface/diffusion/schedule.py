from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DiffusionSchedule:
    """Linear-beta DDPM schedule. Arrays are indexed by ``t - 1`` for
    noise levels ``t = 1..T``; ``alpha_bar(0) == 1``."""

    betas: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=float)
        if b.ndim != 1 or len(b) < 1 or np.any(b <= 0) or np.any(b >= 1):
            raise ValueError("betas must be a non-empty vector in (0, 1)")
        object.__setattr__(self, "betas", b)

    @property
    def T(self) -> int:
        return len(self.betas)

    @property
    def alphas(self) -> np.ndarray:
        return 1.0 - self.betas

    @property
    def alpha_bars(self) -> np.ndarray:
        return np.cumprod(self.alphas)

    def alpha_bar(self, t):
        t = np.asarray(t)
        ab = np.concatenate([[1.0], self.alpha_bars])
        return ab[t]

    def check_t(self, t) -> None:
        t = np.asarray(t)
        if np.any(t < 1) or np.any(t > self.T):
            raise ValueError(f"noise level must be in 1..{self.T}, got {t.min() if t.size else t}")

    def posterior(self, t: int) -> tuple[float, float, float]:
        """Coefficients ``(c0, ct, var)`` of q(x^{t-1} | x^t, x^0):
        mean = c0 * x0 + ct * xt."""
        self.check_t(t)
        beta = self.betas[t - 1]
        ab_t = self.alpha_bar(t)
        ab_prev = self.alpha_bar(t - 1)
        c0 = np.sqrt(ab_prev) * beta / (1.0 - ab_t)
        ct = np.sqrt(1.0 - beta) * (1.0 - ab_prev) / (1.0 - ab_t)
        var = beta * (1.0 - ab_prev) / (1.0 - ab_t)
        return float(c0), float(ct), float(var)

    def to_dict(self) -> dict:
        return {"T_noise": self.T, "betas": self.betas.tolist()}


def build_schedule(T_noise: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02) -> DiffusionSchedule:
    if T_noise < 1:
        raise ValueError("T_noise must be >= 1")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    return DiffusionSchedule(np.linspace(beta_start, beta_end, T_noise))


def forward_diffuse(schedule: DiffusionSchedule, x0, t, noise) -> np.ndarray:
    """sqrt(abar_t) x0 + sqrt(1 - abar_t) noise; ``t`` may be per-batch (B,)."""
    x0 = np.asarray(x0, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if noise.shape != x0.shape:
        raise ValueError(f"noise shape {noise.shape} does not match x0 {x0.shape}")
    schedule.check_t(t)
    ab = np.asarray(schedule.alpha_bar(t), dtype=float)
    ab = ab.reshape(ab.shape + (1,) * (x0.ndim - ab.ndim))
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise
