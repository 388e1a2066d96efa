from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..autodiff import Tape, adam_step, l1_loss
from ..autodiff.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from ..autodiff.optim import AdamState
from .model import Denoiser, DenoiserConfig, predict_x0
from .schedule import DiffusionSchedule, build_schedule, forward_diffuse

STD_FLOOR = 1e-3


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    lr: float = 2e-4
    seed: int = 0
    stride: int | None = None  # window stride for training data; default window // 2
    T_noise: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02

    def schedule(self) -> DiffusionSchedule:
        return build_schedule(self.T_noise, self.beta_start, self.beta_end)


@dataclass
class TrainHistory:
    epochs: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    eval_loss: list[float | None] = field(default_factory=list)

    def append(self, epoch: int, tr: float, ev: float | None) -> None:
        self.epochs.append(epoch)
        self.train_loss.append(tr)
        self.eval_loss.append(ev)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "eval_loss"])
            for e, tr, ev in zip(self.epochs, self.train_loss, self.eval_loss):
                w.writerow([e, repr(tr), "" if ev is None else repr(ev)])


def make_windows(C: np.ndarray, W: np.ndarray, window: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """Slice aligned (N, c) / (N, m) sequences into overlapping windows."""
    C, W = np.asarray(C, dtype=float), np.asarray(W, dtype=float)
    if len(C) != len(W):
        raise ValueError(f"condition has {len(C)} frames but weights have {len(W)}")
    if len(C) < window:
        raise ValueError(f"sequence of {len(C)} frames is shorter than the window {window}")
    starts = list(range(0, len(C) - window + 1, max(1, stride)))
    return np.stack([C[s : s + window] for s in starts]), np.stack([W[s : s + window] for s in starts])


def condition_stats(conditions) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and floored std over a list of (N, c) arrays."""
    allc = np.concatenate([np.asarray(c, dtype=float).reshape(-1, np.shape(c)[-1]) for c in conditions])
    return allc.mean(axis=0), np.maximum(allc.std(axis=0), STD_FLOOR)


def _loss_on(model: Denoiser, schedule: DiffusionSchedule, C, W, t, noise):
    x_t = forward_diffuse(schedule, W, t, noise)
    return l1_loss(predict_x0(model, x_t, C, t), W)


def evaluate_loss(model: Denoiser, schedule: DiffusionSchedule, C, W, seed: int = 12345, batch: int = 256) -> float:
    """Mean L1 over windows with noise levels and noise drawn from a fixed seed,
    so successive calls are directly comparable."""
    rng = np.random.default_rng(seed)
    t = rng.integers(1, schedule.T + 1, size=len(W))
    noise = rng.standard_normal(np.shape(W))
    total = 0.0
    for i in range(0, len(W), batch):
        sl = slice(i, i + batch)
        total += _loss_on(model, schedule, C[sl], W[sl], t[sl], noise[sl]).item() * len(W[sl])
    return total / len(W)


def train(
    model: Denoiser,
    schedule: DiffusionSchedule,
    C: np.ndarray,
    W: np.ndarray,
    cfg: TrainConfig,
    eval_data: tuple[np.ndarray, np.ndarray] | None = None,
    on_epoch: Callable[[int, float, float | None], None] | None = None,
) -> TrainHistory:
    """Fit the x^0 predictor on windows ``C`` (K, T, c) / ``W`` (K, T, m).

    Each step draws t uniformly in 1..T_noise, noises the target and takes an
    Adam step on the L1 between prediction and clean weights."""
    if len(W) == 0 or len(C) != len(W):
        raise ValueError(f"training needs a non-empty dataset of aligned windows, got {len(C)} conditions / {len(W)} targets")
    rng = np.random.default_rng(cfg.seed)
    params = model.parameters()
    opt = AdamState.create(params, lr=cfg.lr)
    hist = TrainHistory()
    K = len(W)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(K)
        running, seen = 0.0, 0
        for i in range(0, K, cfg.batch_size):
            idx = order[i : i + cfg.batch_size]
            t = rng.integers(1, schedule.T + 1, size=len(idx))
            noise = rng.standard_normal(W[idx].shape)
            with Tape() as tape:
                loss = _loss_on(model, schedule, C[idx], W[idx], t, noise)
                tape.backward(loss)
            adam_step(opt, params, [p.grad for p in params])
            running += loss.item() * len(idx)
            seen += len(idx)
        ev = evaluate_loss(model, schedule, *eval_data) if eval_data is not None else None
        hist.append(epoch, running / seen, ev)
        if on_epoch:
            on_epoch(epoch, running / seen, ev)
    return hist


def save_model(path: str | Path, model: Denoiser, schedule: DiffusionSchedule, extra: dict | None = None) -> None:
    meta = {
        "config": model.config.to_dict(),
        "schedule": {"T_noise": schedule.T, "beta_start": float(schedule.betas[0]), "beta_end": float(schedule.betas[-1])},
    }
    if extra:
        meta["extra"] = extra
    save_checkpoint(path, model.state_dict(), meta)


def load_model(path: str | Path) -> tuple[Denoiser, DiffusionSchedule, dict]:
    tensors, meta = load_checkpoint(path)
    try:
        config = DenoiserConfig.from_dict(meta["config"])
        schedule = build_schedule(**meta["schedule"])
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"checkpoint metadata incomplete: {exc}") from None
    return Denoiser.from_state(config, tensors), schedule, meta.get("extra", {})

