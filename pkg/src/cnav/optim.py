"""Adam optimizer with exportable state."""

from __future__ import annotations

import numpy as np


def adam_step(param: np.ndarray, grad: np.ndarray, m: np.ndarray, v: np.ndarray,
              t: int, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8):
    """One Adam update in place on (param, m, v); ``t`` is the 1-based step."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * (grad * grad)
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    """Adam over a list of (name, Tensor) pairs.

    Moment buffers are kept in the parameter dtype and can be exported /
    restored for checkpointing.  Parameters whose ``grad`` is None are
    skipped by :meth:`step`.
    """

    def __init__(self, named_params, lr: float = 3e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.named_params = list(named_params)
        names = [n for n, _ in self.named_params]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names in optimizer group")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {n: np.zeros_like(p.data) for n, p in self.named_params}
        self.v = {n: np.zeros_like(p.data) for n, p in self.named_params}

    def zero_grad(self) -> None:
        for _, p in self.named_params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        for name, p in self.named_params:
            if p.grad is None:
                continue
            adam_step(p.data, p.grad, self.m[name], self.v[name],
                      self.t, self.lr, self.beta1, self.beta2, self.eps)

    def state_tensors(self, prefix: str):
        """(name, array) pairs for checkpointing, moments only."""
        out = []
        for name, _ in self.named_params:
            out.append((f"{prefix}/m/{name}", self.m[name]))
            out.append((f"{prefix}/v/{name}", self.v[name]))
        return out

    def load_state(self, prefix: str, tensors: dict) -> None:
        for name, p in self.named_params:
            m = tensors[f"{prefix}/m/{name}"]
            v = tensors[f"{prefix}/v/{name}"]
            if m.shape != p.data.shape or v.shape != p.data.shape:
                raise ValueError(f"optimizer state shape mismatch for '{name}'")
            self.m[name] = m.astype(p.data.dtype, copy=True)
            self.v[name] = v.astype(p.data.dtype, copy=True)
