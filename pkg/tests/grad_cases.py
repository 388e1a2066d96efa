"""Randomized gradient-check cases, one builder per primitive.

Each builder takes a generator and returns ``(f, params)`` where ``f()`` is a
scalar built from the primitive under test (contracted with a fixed random
tensor so every output element matters)."""

import numpy as np

from imuface.autodiff import Tensor, ops


def _p(rng, *shape, away_from_zero=False):
    x = rng.normal(size=shape)
    if away_from_zero:
        x = np.where(np.abs(x) < 0.05, np.sign(x + 1e-12) * 0.05 + x, x)
    return Tensor(x, requires_grad=True)


def _scalar(out, rng):
    R = Tensor(rng.normal(size=out.shape))
    return ops.sum_(ops.mul(out, R))


def _wrap(build, rng):
    R_rng = np.random.default_rng(rng.integers(2**32))
    state = {}

    def f():
        out = build()
        if "R" not in state:
            state["R"] = Tensor(R_rng.normal(size=out.shape))
        return ops.sum_(ops.mul(out, state["R"]))

    return f


def case_matmul(rng):
    a, b = _p(rng, 2, 3, 4), _p(rng, 4, 5)
    return _wrap(lambda: ops.matmul(a, b), rng), [a, b]


def case_add(rng):
    a, b = _p(rng, 3, 4), _p(rng, 4)
    return _wrap(lambda: ops.add(a, b), rng), [a, b]


def case_sub(rng):
    a, b = _p(rng, 2, 1, 4), _p(rng, 3, 4)
    return _wrap(lambda: ops.sub(a, b), rng), [a, b]


def case_mul(rng):
    a, b = _p(rng, 3, 4), _p(rng, 3, 1)
    return _wrap(lambda: ops.mul(a, b), rng), [a, b]


def case_concat(rng):
    a, b = _p(rng, 2, 3), _p(rng, 2, 2)
    return _wrap(lambda: ops.concat([a, b], axis=-1), rng), [a, b]


def case_slice(rng):
    a = _p(rng, 3, 6)
    return _wrap(lambda: ops.slice_(a, 1, 4, axis=-1), rng), [a]


def case_transpose(rng):
    a = _p(rng, 2, 3, 4)
    return _wrap(lambda: ops.transpose(a), rng), [a]


def case_mean(rng):
    a = _p(rng, 3, 4)
    return _wrap(lambda: ops.mean(a, axis=0), rng), [a]


def case_layer_norm(rng):
    x, g, b = _p(rng, 3, 5), _p(rng, 5), _p(rng, 5)
    return _wrap(lambda: ops.layer_norm(x, g, b), rng), [x, g, b]


def case_softmax(rng):
    a = _p(rng, 3, 4)
    return _wrap(lambda: ops.softmax(a, axis=-1), rng), [a]


def case_gelu(rng):
    a = _p(rng, 3, 4)
    return _wrap(lambda: ops.gelu(a), rng), [a]


def case_relu(rng):
    a = _p(rng, 3, 4, away_from_zero=True)
    return _wrap(lambda: ops.relu(a), rng), [a]


def case_linear(rng):
    x, W, b = _p(rng, 2, 3, 4), _p(rng, 4, 5), _p(rng, 5)
    return _wrap(lambda: ops.linear(x, W, b), rng), [x, W, b]


def case_l1_loss(rng):
    p = _p(rng, 3, 4)
    t = Tensor(p.data + np.where(rng.uniform(size=(3, 4)) < 0.5, -1, 1) * rng.uniform(0.05, 1.0, (3, 4)))
    return (lambda: ops.l1_loss(p, t)), [p]


PRIMITIVES = {
    name[len("case_") :]: fn for name, fn in sorted(globals().items()) if name.startswith("case_")
}


def mlp_case(rng, depth=3, width=6):
    x = Tensor(rng.normal(size=(4, width)))
    layers = [(_p(rng, width, width), _p(rng, width)) for _ in range(depth)]
    target = Tensor(rng.normal(size=(4, width)))

    def f():
        h = x
        for i, (W, b) in enumerate(layers):
            h = ops.linear(h, W, b)
            if i < depth - 1:
                h = ops.gelu(h)
        d = ops.sub(h, target)
        return ops.mean(ops.mul(d, d))

    return f, [t for pair in layers for t in pair]
