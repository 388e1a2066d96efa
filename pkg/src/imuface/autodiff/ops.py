"""Differentiable primitives. Every function returns a new tensor and leaves
its inputs' forward values untouched."""

from __future__ import annotations

import math

import numpy as np

from .tensor import Tensor, as_tensor, emit

GELU_K = math.sqrt(2.0 / math.pi)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (reverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    return emit(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    return emit(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    ad, bd = a.data, b.data
    return emit(ad * bd, (a, b), lambda g: (_unbroadcast(g * bd, a.shape), _unbroadcast(g * ad, b.shape)))


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes with batch broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul: shape mismatch {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def back(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return emit(ad @ bd, (a, b), back)


def concat(tensors, axis: int = -1) -> Tensor:
    ts = tuple(as_tensor(t) for t in tensors)
    if not ts:
        raise ValueError("concat: no tensors")
    ax = axis % ts[0].ndim
    for t in ts[1:]:
        if t.ndim != ts[0].ndim or any(t.shape[i] != ts[0].shape[i] for i in range(t.ndim) if i != ax):
            raise ValueError(f"concat: shape mismatch {ts[0].shape} vs {t.shape} on axis {axis}")
    sizes = [t.shape[ax] for t in ts]
    bounds = np.cumsum([0] + sizes)

    def back(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax) for i in range(len(ts)))

    return emit(np.concatenate([t.data for t in ts], axis=ax), ts, back)


def slice_(t, start: int, stop: int, axis: int = -1) -> Tensor:
    t = as_tensor(t)
    ax = axis % t.ndim
    n = t.shape[ax]
    if not 0 <= start <= stop <= n:
        raise ValueError(f"slice: [{start}:{stop}] outside axis {axis} of shape {t.shape}")
    idx = [slice(None)] * t.ndim
    idx[ax] = slice(start, stop)
    idx = tuple(idx)

    def back(g):
        full = np.zeros_like(t.data)
        full[idx] = g
        return (full,)

    return emit(t.data[idx].copy(), (t,), back)


def transpose(t, axes=None) -> Tensor:
    """Permute axes; the default swaps the last two."""
    t = as_tensor(t)
    if axes is None:
        if t.ndim < 2:
            raise ValueError(f"transpose: need at least 2 axes, got shape {t.shape}")
        axes = list(range(t.ndim))
        axes[-1], axes[-2] = axes[-2], axes[-1]
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return emit(np.transpose(t.data, axes).copy(), (t,), lambda g: (np.transpose(g, inv),))


def reshape(t, shape) -> Tensor:
    t = as_tensor(t)
    src = t.shape
    try:
        out = t.data.reshape(shape).copy()
    except ValueError:
        raise ValueError(f"reshape: cannot reshape {src} into {tuple(shape)}") from None
    return emit(out, (t,), lambda g: (g.reshape(src),))


def sum_(t, axis=None, keepdims: bool = False) -> Tensor:
    t = as_tensor(t)
    shape = t.shape

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return emit(np.sum(t.data, axis=axis, keepdims=keepdims), (t,), back)


def mean(t, axis=None, keepdims: bool = False) -> Tensor:
    t = as_tensor(t)
    shape = t.shape
    n = t.size if axis is None else np.prod([shape[a] for a in np.atleast_1d(axis)])

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / n, shape).copy(),)

    return emit(np.mean(t.data, axis=axis, keepdims=keepdims), (t,), back)


def layer_norm(x, gamma=None, beta=None, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale by ``gamma`` and shift by ``beta``."""
    x = as_tensor(x)
    d = x.shape[-1]
    gamma = as_tensor(np.ones(d) if gamma is None else gamma)
    beta = as_tensor(np.zeros(d) if beta is None else beta)
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ValueError(f"layer_norm: shape mismatch {x.shape} vs gamma {gamma.shape} / beta {beta.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    gd = gamma.data

    def back(g):
        dxhat = g * gd
        dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        red = tuple(range(g.ndim - 1))
        return dx, (g * xhat).sum(axis=red), g.sum(axis=red)

    return emit(xhat * gd + beta.data, (x, gamma, beta), back)


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)
    return emit(s, (x,), lambda g: (s * (g - (g * s).sum(axis=axis, keepdims=True)),))


def gelu(x) -> Tensor:
    """tanh approximation of GELU."""
    x = as_tensor(x)
    xd = x.data
    u = GELU_K * (xd + 0.044715 * xd**3)
    th = np.tanh(u)

    def back(g):
        du = GELU_K * (1.0 + 3 * 0.044715 * xd**2)
        return (g * (0.5 * (1.0 + th) + 0.5 * xd * (1.0 - th * th) * du),)

    return emit(0.5 * xd * (1.0 + th), (x,), back)


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return emit(np.where(mask, x.data, 0.0).astype(x.data.dtype), (x,), lambda g: (g * mask,))


def linear(x, W, b=None) -> Tensor:
    """``x @ W + b`` with ``W`` shaped (in, out)."""
    x, W = as_tensor(x), as_tensor(W)
    if W.ndim != 2 or x.shape[-1] != W.shape[0]:
        raise ValueError(f"linear: shape mismatch input {x.shape} vs weight {W.shape}")
    if b is None:
        return matmul(x, W)
    b = as_tensor(b)
    if b.shape != (W.shape[1],):
        raise ValueError(f"linear: shape mismatch weight {W.shape} vs bias {b.shape}")
    xd, Wd = x.data, W.data

    def back(g):
        gx = g @ Wd.T
        gW = xd.reshape(-1, xd.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return gx, gW, g.reshape(-1, g.shape[-1]).sum(axis=0)

    return emit(xd @ Wd + b.data, (x, W, b), back)


def l1_loss(pred, target) -> Tensor:
    """Mean absolute error."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ValueError(f"l1_loss: shape mismatch {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    n = diff.size
    sgn = np.sign(diff)
    return emit(np.array(np.abs(diff).mean()), (pred, target), lambda g: (g * sgn / n, -g * sgn / n))
