"""Depth-camera multi-agent navigation stack on a numpy autodiff core."""

from cnav.tensor import (
    Tape,
    Tensor,
    add,
    backward,
    clip,
    concat,
    conv2d,
    conv2d_transpose,
    detach,
    div,
    exp,
    log,
    matmul,
    minimum,
    mul,
    reduce_mean,
    reduce_sum,
    relu,
    reshape,
    square,
    sub,
    tanh,
)

__all__ = [
    "Tape",
    "Tensor",
    "add",
    "backward",
    "clip",
    "concat",
    "conv2d",
    "conv2d_transpose",
    "detach",
    "div",
    "exp",
    "log",
    "matmul",
    "minimum",
    "mul",
    "reduce_mean",
    "reduce_sum",
    "relu",
    "reshape",
    "square",
    "sub",
    "tanh",
]

__version__ = "0.1.0"
