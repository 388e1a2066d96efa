"""Dense tensors recorded on a tape for reverse-mode differentiation.

Operations executed while a :class:`Tape` is active (and touching at least
one tensor with ``requires_grad``) append a record holding the inputs, the
output and a closure mapping the output gradient to input gradients.
:func:`backward` replays the records in reverse.

A tape belongs to the thread that opened it.
"""

from __future__ import annotations

import threading

import numpy as np

_state = threading.local()
_default_dtype = np.float64


def set_default_dtype(dtype) -> None:
    global _default_dtype
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ValueError("only float32 and float64 are supported")
    _default_dtype = dtype.type


def get_default_dtype():
    return _default_dtype


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        self.data = np.array(data, dtype=dtype or _default_dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    # operator sugar; implementations live in ops
    def __add__(self, other):
        from .ops import add

        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from .ops import sub

        return sub(self, other)

    def __rsub__(self, other):
        from .ops import sub

        return sub(other, self)

    def __mul__(self, other):
        from .ops import mul

        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from .ops import mul

        return mul(self, -1.0)

    def __matmul__(self, other):
        from .ops import matmul

        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Records differentiable operations; use as a context manager."""

    def __init__(self):
        self.records: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def __enter__(self) -> "Tape":
        stack = getattr(_state, "stack", None)
        if stack is None:
            stack = _state.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _state.stack.pop()

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> None:
        self.records.append((out, inputs, backward_fn))

    def backward(self, loss: Tensor) -> dict[Tensor, np.ndarray]:
        """Gradients of scalar ``loss`` for every leaf with ``requires_grad``
        seen on this tape; also stored in each leaf's ``.grad``. Leaves the
        loss does not depend on get zeros."""
        if loss.data.size != 1:
            raise ValueError(f"loss must be a scalar, got shape {loss.shape}")
        produced = {id(out) for out, _, _ in self.records}
        if id(loss) not in produced:
            raise ValueError("loss was not computed on this tape")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}
        for out, inputs, fn in reversed(self.records):
            for t in inputs:
                if t.requires_grad and id(t) not in produced:
                    leaves[id(t)] = t
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for t, gi in zip(inputs, fn(g)):
                if gi is None or not t.requires_grad:
                    continue
                prev = grads.get(id(t))
                grads[id(t)] = gi if prev is None else prev + gi
        result = {}
        for key, leaf in leaves.items():
            g = grads.get(key)
            leaf.grad = np.zeros_like(leaf.data) if g is None else np.asarray(g, dtype=leaf.data.dtype).reshape(leaf.shape)
            result[leaf] = leaf.grad
        return result


def current_tape() -> Tape | None:
    stack = getattr(_state, "stack", None)
    return stack[-1] if stack else None


def backward(loss: Tensor, tape: Tape | None = None) -> dict[Tensor, np.ndarray]:
    tape = tape or current_tape()
    if tape is None:
        raise RuntimeError("no active tape")
    return tape.backward(loss)


def emit(data: np.ndarray, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    """Wrap an op result and record it when a tape is active."""
    needs = any(t.requires_grad for t in inputs)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = needs
    out.name = None
    tape = current_tape()
    if needs and tape is not None:
        tape.record(out, inputs, backward_fn)
    return out
