"""Minimal layer containers over the tensor ops."""

from __future__ import annotations

import numpy as np

from cnav import tensor as T


def uniform_fan_in(rng: np.random.Generator, shape, fan_in: int, dtype, scale: float = 1.0):
    """U(-s/sqrt(fan_in), s/sqrt(fan_in)) init, the default for every layer."""
    bound = scale / np.sqrt(fan_in)
    return T.Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True)


class Linear:
    """Affine map x @ w + b for row-major batches."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 dtype=np.float32, scale: float = 1.0):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.w = uniform_fan_in(rng, (in_dim, out_dim), in_dim, dtype, scale)
        self.b = uniform_fan_in(rng, (out_dim,), in_dim, dtype, scale)

    def __call__(self, x: T.Tensor) -> T.Tensor:
        if x.shape[-1] != self.in_dim:
            raise ValueError(f"linear expects {self.in_dim} features, got shape {x.shape}")
        return T.add(T.matmul(x, self.w), self.b)

    def params(self, prefix: str):
        return [(f"{prefix}/w", self.w), (f"{prefix}/b", self.b)]


class Conv2d:
    """Valid-padding conv layer; weight layout [C_out, C_in, kh, kw]."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int, stride: int,
                 rng: np.random.Generator, dtype=np.float32):
        fan_in = in_ch * kernel * kernel
        self.stride = stride
        self.w = uniform_fan_in(rng, (out_ch, in_ch, kernel, kernel), fan_in, dtype)
        self.b = uniform_fan_in(rng, (out_ch,), fan_in, dtype)

    def __call__(self, x: T.Tensor) -> T.Tensor:
        y = T.conv2d(x, self.w, self.stride)
        return T.add(y, T.reshape(self.b, (1, -1, 1, 1)))

    def params(self, prefix: str):
        return [(f"{prefix}/w", self.w), (f"{prefix}/b", self.b)]


class ConvTranspose2d:
    """Transposed conv layer; weight layout [C_in, C_out, kh, kw]."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int, stride: int,
                 rng: np.random.Generator, dtype=np.float32):
        fan_in = in_ch * kernel * kernel
        self.stride = stride
        self.w = uniform_fan_in(rng, (in_ch, out_ch, kernel, kernel), fan_in, dtype)
        self.b = uniform_fan_in(rng, (out_ch,), fan_in, dtype)

    def __call__(self, x: T.Tensor) -> T.Tensor:
        y = T.conv2d_transpose(x, self.w, self.stride)
        return T.add(y, T.reshape(self.b, (1, -1, 1, 1)))

    def params(self, prefix: str):
        return [(f"{prefix}/w", self.w), (f"{prefix}/b", self.b)]
