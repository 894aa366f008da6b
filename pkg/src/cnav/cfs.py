"""Trainable channel selection: a weight vector mapped to a near-binary mask.

A ``CfsModule`` owns a real weight per channel plus a one-hidden-layer
transform.  The mask is ``m = v^2 / (v^2 + eps)`` with ``v = relu(mlp(w))``,
so entries are exactly zero wherever the relu cuts off and within ``eps``
of one wherever ``v`` is order unity.  Multiplying features by ``m``
therefore performs a differentiable hard channel drop whose pattern is
itself learned.

The module is constructed even when ``enabled`` is False (pinned mode) so
that a run with gating off consumes the same initializer draws; pinned
masks are constant ones and expose no trainable parameters.
"""

from __future__ import annotations

import numpy as np

from cnav import tensor as T
from cnav.nn import Linear


class CfsModule:
    def __init__(self, n_channels: int, rng: np.random.Generator,
                 eps: float = 1e-8, enabled: bool = True, dtype=np.float32):
        if n_channels < 1:
            raise ValueError(f"need at least one channel, got {n_channels}")
        if eps <= 0:
            raise ValueError(f"eps must be positive, got {eps}")
        self.n_channels = n_channels
        self.eps = float(eps)
        self.enabled = bool(enabled)
        hidden = max(n_channels // 2, 8)
        # start every channel open: weights near 0.5, transform biased to 0.5
        self.w = T.Tensor(
            (0.5 + rng.uniform(-0.05, 0.05, n_channels)).astype(dtype),
            requires_grad=True)
        self.lin1 = Linear(n_channels, hidden, rng, dtype)
        self.lin2 = Linear(hidden, n_channels, rng, dtype)
        self.lin2.b = T.Tensor(np.full(n_channels, 0.5, dtype), requires_grad=True)
        self._ones = T.Tensor(np.ones((1, n_channels), dtype))

    def params(self, prefix: str):
        if not self.enabled:
            return []
        return ([(f"{prefix}/w", self.w)]
                + self.lin1.params(f"{prefix}/lin1")
                + self.lin2.params(f"{prefix}/lin2"))


def compute_mask(module: CfsModule) -> T.Tensor:
    """Mask tensor of shape [1, C]; constant ones when the module is pinned."""
    if not module.enabled:
        return module._ones
    h = T.tanh(module.lin1(T.reshape(module.w, (1, -1))))
    v = T.relu(module.lin2(h))
    v2 = T.square(v)
    return T.div(v2, T.add(v2, module.eps))


def mask_values(module: CfsModule) -> np.ndarray:
    """Tape-free mask evaluation (for logging); same math as compute_mask."""
    if not module.enabled:
        return np.ones(module.n_channels, dtype=module.w.dtype)
    h = np.tanh(module.w.data @ module.lin1.w.data + module.lin1.b.data)
    v = np.maximum(h @ module.lin2.w.data + module.lin2.b.data, 0.0)
    v2 = v * v
    return v2 / (v2 + np.asarray(module.eps, dtype=v2.dtype))


def apply(x: T.Tensor, m: T.Tensor) -> T.Tensor:
    """Gate a [batch, C] feature block: x * m broadcast over the batch."""
    if x.shape[-1] != m.shape[-1]:
        raise ValueError(f"channel mismatch: features {x.shape} vs mask {m.shape}")
    return T.mul(x, m)


def sparsity(m, threshold: float = 0.0) -> float:
    """Fraction of mask entries at (or below) the zero threshold."""
    vals = m.data if isinstance(m, T.Tensor) else np.asarray(m)
    if vals.size == 0:
        raise ValueError("sparsity of an empty mask")
    return float(np.count_nonzero(vals <= threshold) / vals.size)
