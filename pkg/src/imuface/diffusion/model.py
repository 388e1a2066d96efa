"""Conditional transformer denoiser.

The network predicts the clean window x^0 from the noised weights x^t, the
IMU condition C and the noise-level embedding em(t):

    concat(x^t, C) -> FC -> (+ positional) -> (+ em(t)) -> pre-norm blocks -> LN -> FC
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor, as_tensor


@dataclass
class DenoiserConfig:
    layers: int = 4
    d_model: int = 512
    heads: int = 8
    ff_width: int = 2048
    window: int = 120
    m: int = 53
    n_sensors: int = 11
    positional: bool = True

    def __post_init__(self):
        if self.d_model % self.heads:
            raise ValueError(f"d_model {self.d_model} not divisible by heads {self.heads}")
        if self.window < 1 or self.m < 1 or self.layers < 0 or self.n_sensors < 1:
            raise ValueError("window, m and n_sensors must be >= 1; layers >= 0")

    @property
    def cond_width(self) -> int:
        return 7 * self.n_sensors

    @classmethod
    def toy(cls, **kw) -> "DenoiserConfig":
        base = dict(layers=2, d_model=32, heads=4, ff_width=64, window=24, m=8, n_sensors=11)
        base.update(kw)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DenoiserConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown denoiser config fields {sorted(unknown)}")
        return cls(**d)


def timestep_features(t, dim: int) -> np.ndarray:
    """Sinusoidal features of integer noise levels; (B,) -> (B, dim)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half, 1))
    ang = t[:, None] * freqs[None]
    feats = np.concatenate([np.sin(ang), np.cos(ang)], axis=1)
    if dim % 2:
        feats = np.concatenate([feats, np.zeros((len(t), 1))], axis=1)
    return feats


class Denoiser:
    """Parameters plus the (fixed) condition normalization."""

    def __init__(self, config: DenoiserConfig, params: dict[str, Tensor], cond_mean=None, cond_std=None):
        self.config = config
        self.params = params
        cw = config.cond_width
        self.cond_mean = np.zeros(cw) if cond_mean is None else np.asarray(cond_mean, dtype=float)
        self.cond_std = np.ones(cw) if cond_std is None else np.asarray(cond_std, dtype=float)
        if self.cond_mean.shape != (cw,) or self.cond_std.shape != (cw,):
            raise ValueError(f"condition normalization must have width {cw}")

    @classmethod
    def init(cls, config: DenoiserConfig, seed: int = 0, zero_final: bool = True) -> "Denoiser":
        rng = np.random.default_rng(seed)
        d, m = config.d_model, config.m
        p: dict[str, np.ndarray] = {}

        def dense(name, fan_in, fan_out):
            p[f"{name}.W"] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), (fan_in, fan_out))
            p[f"{name}.b"] = np.zeros(fan_out)

        dense("in", m + config.cond_width, d)
        if config.positional:
            p["pos"] = rng.normal(0.0, 0.02, (config.window, d))
        dense("em.0", d, d)
        dense("em.1", d, d)
        for i in range(config.layers):
            pre = f"block{i}"
            p[f"{pre}.ln1.g"], p[f"{pre}.ln1.b"] = np.ones(d), np.zeros(d)
            for proj in ("q", "k", "v", "o"):
                dense(f"{pre}.attn.{proj}", d, d)
            p[f"{pre}.ln2.g"], p[f"{pre}.ln2.b"] = np.ones(d), np.zeros(d)
            dense(f"{pre}.ff.0", d, config.ff_width)
            dense(f"{pre}.ff.1", config.ff_width, d)
        p["ln_f.g"], p["ln_f.b"] = np.ones(d), np.zeros(d)
        dense("out", d, m)
        if zero_final:
            p["out.W"][:] = 0.0
        params = {k: Tensor(v, requires_grad=True, name=k) for k, v in p.items()}
        return cls(config, params)

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {k: t.data for k, t in self.params.items()}
        out["cond_mean"] = self.cond_mean
        out["cond_std"] = self.cond_std
        return out

    @classmethod
    def from_state(cls, config: DenoiserConfig, state: dict[str, np.ndarray]) -> "Denoiser":
        state = dict(state)
        mean, std = state.pop("cond_mean", None), state.pop("cond_std", None)
        ref = cls.init(config)
        if set(state) != set(ref.params):
            raise ValueError(f"checkpoint tensors do not match config: {sorted(set(state) ^ set(ref.params))}")
        params = {}
        for k, t in ref.params.items():
            if state[k].shape != t.shape:
                raise ValueError(f"tensor {k}: checkpoint shape {state[k].shape} != expected {t.shape}")
            params[k] = Tensor(state[k], requires_grad=True, name=k)
        return cls(config, params, mean, std)


def noise_embedding(model: Denoiser, t) -> Tensor:
    """em(t): sinusoidal features through a 2-layer MLP; (B,) -> (B, 1, d)."""
    p = model.params
    d = model.config.d_model
    feats = Tensor(timestep_features(t, d)[:, None, :])
    h = ops.gelu(ops.linear(feats, p["em.0.W"], p["em.0.b"]))
    return ops.linear(h, p["em.1.W"], p["em.1.b"])


def _attention(x: Tensor, p, pre: str, heads: int) -> Tensor:
    d = x.shape[-1]
    dh = d // heads
    q = ops.linear(x, p[f"{pre}.q.W"], p[f"{pre}.q.b"])
    k = ops.linear(x, p[f"{pre}.k.W"], p[f"{pre}.k.b"])
    v = ops.linear(x, p[f"{pre}.v.W"], p[f"{pre}.v.b"])
    outs = []
    for h in range(heads):
        lo, hi = h * dh, (h + 1) * dh
        qh, kh, vh = ops.slice_(q, lo, hi), ops.slice_(k, lo, hi), ops.slice_(v, lo, hi)
        scores = ops.mul(ops.matmul(qh, ops.transpose(kh)), 1.0 / np.sqrt(dh))
        outs.append(ops.matmul(ops.softmax(scores, axis=-1), vh))
    merged = outs[0] if heads == 1 else ops.concat(outs, axis=-1)
    return ops.linear(merged, p[f"{pre}.o.W"], p[f"{pre}.o.b"])


def denoiser_forward(model: Denoiser, x_t, C, em: Tensor) -> Tensor:
    """Predict x^0 for noised weights ``x_t`` (B, T, m) given condition ``C``
    (B, T, 7 * sensors) and ``em`` (B, 1, d)."""
    cfg, p = model.config, model.params
    x_t, C = as_tensor(x_t), as_tensor(C)
    if x_t.ndim != 3 or x_t.shape[-1] != cfg.m:
        raise ValueError(f"x_t must be (B, T, {cfg.m}), got {x_t.shape}")
    if C.shape != x_t.shape[:2] + (cfg.cond_width,):
        raise ValueError(f"condition shape {C.shape} does not match x_t {x_t.shape} / width {cfg.cond_width}")
    T = x_t.shape[1]
    cond = Tensor((C.data - model.cond_mean) / model.cond_std)
    h = ops.linear(ops.concat([x_t, cond], axis=-1), p["in.W"], p["in.b"])
    if cfg.positional:
        if T > cfg.window:
            raise ValueError(f"window length {T} exceeds positional table {cfg.window}")
        h = ops.add(h, ops.slice_(p["pos"], 0, T, axis=0))
    h = ops.add(h, em)
    for i in range(cfg.layers):
        pre = f"block{i}"
        a = ops.layer_norm(h, p[f"{pre}.ln1.g"], p[f"{pre}.ln1.b"])
        h = ops.add(h, _attention(a, p, f"{pre}.attn", cfg.heads))
        f = ops.layer_norm(h, p[f"{pre}.ln2.g"], p[f"{pre}.ln2.b"])
        f = ops.linear(ops.gelu(ops.linear(f, p[f"{pre}.ff.0.W"], p[f"{pre}.ff.0.b"])), p[f"{pre}.ff.1.W"], p[f"{pre}.ff.1.b"])
        h = ops.add(h, f)
    h = ops.layer_norm(h, p["ln_f.g"], p["ln_f.b"])
    return ops.linear(h, p["out.W"], p["out.b"])


def predict_x0(model: Denoiser, x_t, C, t) -> Tensor:
    x_t = np.asarray(x_t.data if isinstance(x_t, Tensor) else x_t, dtype=float)
    t = np.broadcast_to(np.asarray(t), (x_t.shape[0],))
    return denoiser_forward(model, x_t, C, noise_embedding(model, t))
