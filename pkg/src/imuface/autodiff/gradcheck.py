"""Central finite-difference gradient checks."""

from __future__ import annotations

import numpy as np

from .tensor import Tape, Tensor


def numerical_grad(f, params: list[Tensor], h: float = 1e-5) -> list[np.ndarray]:
    """d f() / d p for each tensor, perturbing ``p.data`` in place."""
    out = []
    for p in params:
        g = np.zeros_like(p.data)
        flat, gflat = p.data.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = float(f().data)
            flat[i] = old - h
            down = float(f().data)
            flat[i] = old
            gflat[i] = (up - down) / (2 * h)
        out.append(g)
    return out


def analytic_grad(f, params: list[Tensor]) -> list[np.ndarray]:
    with Tape() as tape:
        loss = f()
        tape.backward(loss)
    return [p.grad.copy() for p in params]


FLOOR = 1e-6


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = FLOOR) -> float:
    """||a - b|| / max(||a||, ||b||, floor).

    The floor keeps gradients that are identically zero (a key bias under
    softmax, for instance) from turning finite-difference roundoff into a
    relative error of 1."""
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), floor))


def gradcheck(f, params: list[Tensor], h: float = 1e-5) -> float:
    """Worst relative error between reverse-mode and finite-difference
    gradients of the scalar ``f()`` over ``params``."""
    ana = analytic_grad(f, params)
    num = numerical_grad(f, params, h)
    return max(relative_error(a, n) for a, n in zip(ana, num))
