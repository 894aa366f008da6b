"""Finite-difference verification of the autodiff adjoints.

The checker treats a forward builder as a black-box scalar function of its
leaf parameters, compares the taped gradient against central differences,
and reports one worst-case relative error per component.  Relative error
for a parameter tensor is

    max|analytic - numeric| / max(max|analytic|, max|numeric|, 1e-8)

so a wrong adjoint shows up even when the gradient scale is far from 1.
All checks run in float64; non-smooth ops (relu, minimum, clip) use inputs
kept away from their kink points.
"""

from __future__ import annotations

import numpy as np

from cnav import tensor as T


def numeric_gradient(f, param: T.Tensor, h: float = 1e-5) -> np.ndarray:
    """Central-difference d f / d param, evaluating f once per +/- bump."""
    base = param.data
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = f()
        flat[i] = keep - h
        down = f()
        flat[i] = keep
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def check_gradients(build, params, h: float = 1e-5) -> float:
    """Worst relative error between taped and numeric gradients.

    ``build()`` runs the forward pass and returns a scalar Tensor; it must
    be deterministic given the current values of ``params`` (freeze any
    sampling noise before calling).  ``params`` is a list of leaf tensors
    with ``requires_grad=True``.
    """
    for p in params:
        p.grad = None
    with T.Tape() as tape:
        loss = build()
    tape.backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    def value():
        return float(build().data)

    worst = 0.0
    for p, a in zip(params, analytic):
        n = numeric_gradient(value, p, h)
        denom = max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0), 1e-8)
        err = float(np.abs(a - n).max(initial=0.0) / denom)
        worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# battery
# ---------------------------------------------------------------------------


def _away_from_zero(rng, shape, low: float = 0.2, high: float = 1.5) -> np.ndarray:
    """Values with |x| in [low, high]: safe for relu/minimum kinks at h=1e-5."""
    mag = rng.uniform(low, high, size=shape)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return mag * sign


def _primitive_components(rng: np.random.Generator):
    f64 = np.float64

    def leaf(arr):
        return T.Tensor(np.asarray(arr, dtype=f64), requires_grad=True)

    comps = []

    a = leaf(rng.standard_normal((4, 3)))
    b = leaf(rng.standard_normal((3, 5)))
    comps.append(("matmul", lambda: T.reduce_sum(T.square(T.matmul(a, b))), [a, b]))

    x = leaf(rng.standard_normal((2, 3)))
    y = leaf(rng.standard_normal((3,)))
    comps.append(("add_broadcast", lambda: T.reduce_sum(T.square(T.add(x, y))), [x, y]))
    comps.append(("sub_broadcast", lambda: T.reduce_sum(T.square(T.sub(x, y))), [x, y]))
    comps.append(("mul_broadcast", lambda: T.reduce_sum(T.square(T.mul(x, y))), [x, y]))

    num = leaf(rng.standard_normal((3, 4)))
    den = leaf(_away_from_zero(rng, (3, 4), 0.5, 2.0))
    comps.append(("div", lambda: T.reduce_sum(T.square(T.div(num, den))), [num, den]))

    r = leaf(_away_from_zero(rng, (4, 4)))
    comps.append(("relu", lambda: T.reduce_sum(T.square(T.relu(r))), [r]))

    t = leaf(rng.standard_normal((4, 4)))
    comps.append(("tanh", lambda: T.reduce_sum(T.square(T.tanh(t))), [t]))
    e = leaf(rng.uniform(-1.0, 1.0, (4, 4)))
    comps.append(("exp", lambda: T.reduce_sum(T.square(T.exp(e))), [e]))
    lg = leaf(rng.uniform(0.3, 3.0, (4, 4)))
    comps.append(("log", lambda: T.reduce_sum(T.square(T.log(lg))), [lg]))
    sq = leaf(rng.standard_normal((4, 4)))
    comps.append(("square", lambda: T.reduce_sum(T.square(T.square(sq))), [sq]))

    m1 = leaf(rng.standard_normal((5, 5)))
    m2 = leaf(m1.data + _away_from_zero(rng, (5, 5), 0.3, 1.0))
    comps.append(("minimum", lambda: T.reduce_sum(T.square(T.minimum(m1, m2))), [m1, m2]))

    # clip bounds chosen so no sample sits within 0.1 of a bound
    cl = leaf(rng.uniform(-2.0, 2.0, (4, 4)))
    cl.data[np.abs(np.abs(cl.data) - 1.0) < 0.1] = 0.0
    comps.append(("clip", lambda: T.reduce_sum(T.square(T.clip(cl, -1.0, 1.0))), [cl]))

    s = leaf(rng.standard_normal((3, 4, 2)))
    comps.append(("reduce_sum_axes",
                  lambda: T.reduce_sum(T.square(T.reduce_sum(s, axes=(0, 2)))), [s]))
    comps.append(("reduce_mean",
                  lambda: T.reduce_sum(T.square(T.reduce_mean(s, axes=1))), [s]))

    rs = leaf(rng.standard_normal((2, 6)))
    comps.append(("reshape", lambda: T.reduce_sum(T.square(T.reshape(rs, (3, 4)))), [rs]))

    c1 = leaf(rng.standard_normal((2, 3)))
    c2 = leaf(rng.standard_normal((2, 2)))
    comps.append(("concat",
                  lambda: T.reduce_sum(T.square(T.concat([c1, c2], axis=1))), [c1, c2]))

    cx = leaf(rng.standard_normal((2, 2, 6, 7)))
    ck = leaf(rng.standard_normal((3, 2, 3, 3)))
    comps.append(("conv2d_s1", lambda: T.reduce_sum(T.square(T.conv2d(cx, ck, 1))), [cx, ck]))
    comps.append(("conv2d_s2", lambda: T.reduce_sum(T.square(T.conv2d(cx, ck, 2))), [cx, ck]))

    dx = leaf(rng.standard_normal((2, 3, 3, 4)))
    dk = leaf(rng.standard_normal((3, 2, 3, 3)))
    comps.append(("conv2d_transpose_s1",
                  lambda: T.reduce_sum(T.square(T.conv2d_transpose(dx, dk, 1))), [dx, dk]))
    comps.append(("conv2d_transpose_s2",
                  lambda: T.reduce_sum(T.square(T.conv2d_transpose(dx, dk, 2))), [dx, dk]))

    return comps


def _composite_components(rng: np.random.Generator):
    # imported here so the primitive battery has no dependency on the nets
    from cnav import losscheck

    return losscheck.components(rng)


def run_battery(seed: int = 0, include_composites: bool = True):
    """Run every component; returns a list of (name, worst_rel_err)."""
    rng = np.random.default_rng(seed)
    comps = _primitive_components(rng)
    if include_composites:
        comps.extend(_composite_components(rng))
    results = []
    with T.finite_checks():
        for name, build, params in comps:
            results.append((name, check_gradients(build, params)))
    return results
