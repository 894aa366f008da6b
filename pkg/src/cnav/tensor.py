"""Reverse-mode automatic differentiation over dense numpy arrays.

The engine is a flat gradient tape: while a :class:`Tape` is active, every
primitive op that touches a grad-requiring input appends one entry
(output, parents, backward closure) to the tape.  Because entries are
appended in execution order, a single reverse sweep over the tape is a
valid topological traversal, and each recorded op is visited exactly once.

Only float32 and float64 tensors are supported.  Mixed-dtype arithmetic is
rejected rather than silently promoted so a training graph cannot drift
between widths.
"""

from __future__ import annotations

import contextlib

import numpy as np

_SUPPORTED = (np.float32, np.float64)

# Opt-in guard: when enabled, every op output is checked for NaN/Inf and a
# FloatingPointError is raised naming the op.  Off by default because the
# check costs a pass over every result array.
_strict_finite = False


@contextlib.contextmanager
def finite_checks(enabled: bool = True):
    """Context manager toggling per-op NaN/Inf detection."""
    global _strict_finite
    prev = _strict_finite
    _strict_finite = enabled
    try:
        yield
    finally:
        _strict_finite = prev


def strict_finite_enabled() -> bool:
    return _strict_finite


class Tensor:
    """A dense array that can participate in the gradient tape.

    Attributes
    ----------
    data:
        The underlying numpy array (float32 or float64).
    requires_grad:
        True for trainable leaves, and set automatically on op outputs
        recorded while a tape is active.
    grad:
        Accumulated gradient (numpy array of ``data``'s shape), or None.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in _SUPPORTED:
            arr = arr.astype(np.float32)
        if arr.dtype not in _SUPPORTED:
            raise TypeError(f"unsupported tensor dtype {arr.dtype}; use float32 or float64")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        """The raw array.  Treat as read-only while a tape references it."""
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """A view of the same values cut loose from the tape."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"


class Tape:
    """Ordered record of executed primitive ops.

    Use as a context manager around the forward computation, then call
    :meth:`backward` on a scalar recorded within it.  A tape can be swept
    only once; build a fresh tape per loss.
    """

    __slots__ = ("_entries", "_out_ids", "_used")

    def __init__(self):
        self._entries = []
        self._out_ids = set()
        self._used = False

    def __enter__(self) -> "Tape":
        _tape_stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _tape_stack.pop()
        if popped is not self:
            raise RuntimeError("tape stack corrupted: exited a tape that is not innermost")
        return False

    def __len__(self) -> int:
        return len(self._entries)

    def backward(self, loss: Tensor) -> None:
        """Reverse sweep seeding d(loss)/d(loss) = 1.

        ``loss`` must be a scalar produced on this tape.  Gradients
        accumulate into ``.grad`` of every reachable tensor that requires
        one; unreachable tensors are left untouched.
        """
        if self._used:
            raise RuntimeError("tape already swept; record a fresh tape per backward pass")
        if loss.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        if id(loss) not in self._out_ids:
            raise ValueError("loss was not recorded on this tape")
        self._used = True
        loss.grad = np.ones_like(loss.data)
        for out, parents, backfn in reversed(self._entries):
            g = out.grad
            if g is None:
                continue
            partials = backfn(g)
            for parent, pg in zip(parents, partials):
                if pg is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = pg
                else:
                    parent.grad = parent.grad + pg


_tape_stack: list = []


def _active_tape():
    return _tape_stack[-1] if _tape_stack else None


def backward(loss: Tensor, tape: Tape | None = None) -> None:
    """Run the reverse sweep on ``tape`` (default: the innermost active one)."""
    t = tape if tape is not None else _active_tape()
    if t is None:
        raise RuntimeError("no active tape; wrap the forward pass in `with Tape() as tape:`")
    t.backward(loss)


def _as_tensor(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.dtype))


def _check_pair(a: Tensor, b: Tensor, op: str) -> None:
    if a.dtype != b.dtype:
        raise TypeError(f"{op}: mixed dtypes {a.dtype} and {b.dtype}")


def _finish(out_data: np.ndarray, parents, backfn, op: str) -> Tensor:
    if _strict_finite and not np.all(np.isfinite(out_data)):
        raise FloatingPointError(f"non-finite values produced by op '{op}'")
    out = Tensor(out_data)
    tape = _active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        tape._entries.append((out, parents, backfn))
        tape._out_ids.add(id(out))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# primitive ops
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b) -> Tensor:
    """Matrix product of 2-D tensors (stacked batches follow numpy rules)."""
    b = _as_tensor(b, a) if not isinstance(b, Tensor) else b
    if not isinstance(a, Tensor):
        a = _as_tensor(a, b)
    _check_pair(a, b, "matmul")
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul needs 2-D operands, got shapes {a.shape} x {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out_data = a.data @ b.data

    def backfn(g):
        ga = g @ np.swapaxes(b.data, -1, -2) if a.requires_grad else None
        gb = np.swapaxes(a.data, -1, -2) @ g if b.requires_grad else None
        if ga is not None:
            ga = _unbroadcast(ga, a.shape)
        if gb is not None:
            gb = _unbroadcast(gb, b.shape)
        return ga, gb

    return _finish(out_data, (a, b), backfn, "matmul")


def _elementwise(a, b, op: str):
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        raise TypeError(f"{op}: at least one operand must be a Tensor")
    if not isinstance(a, Tensor):
        a = _as_tensor(a, b)
    b = _as_tensor(b, a)
    _check_pair(a, b, op)
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None
    return a, b


def add(a, b) -> Tensor:
    a, b = _elementwise(a, b, "add")
    out_data = a.data + b.data

    def backfn(g):
        return (
            _unbroadcast(g, a.shape) if a.requires_grad else None,
            _unbroadcast(g, b.shape) if b.requires_grad else None,
        )

    return _finish(out_data, (a, b), backfn, "add")


def sub(a, b) -> Tensor:
    a, b = _elementwise(a, b, "sub")
    out_data = a.data - b.data

    def backfn(g):
        return (
            _unbroadcast(g, a.shape) if a.requires_grad else None,
            _unbroadcast(-g, b.shape) if b.requires_grad else None,
        )

    return _finish(out_data, (a, b), backfn, "sub")


def mul(a, b) -> Tensor:
    a, b = _elementwise(a, b, "mul")
    out_data = a.data * b.data

    def backfn(g):
        return (
            _unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
        )

    return _finish(out_data, (a, b), backfn, "mul")


def div(a, b) -> Tensor:
    a, b = _elementwise(a, b, "div")
    out_data = a.data / b.data

    def backfn(g):
        ga = _unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = None
        if b.requires_grad:
            gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return _finish(out_data, (a, b), backfn, "div")


def minimum(a, b) -> Tensor:
    """Elementwise minimum; at ties the gradient routes to the first operand."""
    a, b = _elementwise(a, b, "minimum")
    take_a = a.data <= b.data
    out_data = np.where(take_a, a.data, b.data)

    def backfn(g):
        ga = _unbroadcast(g * take_a, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * ~take_a, b.shape) if b.requires_grad else None
        return ga, gb

    return _finish(out_data, (a, b), backfn, "minimum")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out_data = np.where(mask, x.data, 0.0).astype(x.dtype, copy=False)

    def backfn(g):
        return (g * mask,)

    return _finish(out_data, (x,), backfn, "relu")


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)

    def backfn(g):
        return (g * (1.0 - out_data * out_data),)

    return _finish(out_data, (x,), backfn, "tanh")


def exp(x: Tensor) -> Tensor:
    out_data = np.exp(x.data)

    def backfn(g):
        return (g * out_data,)

    return _finish(out_data, (x,), backfn, "exp")


def log(x: Tensor) -> Tensor:
    out_data = np.log(x.data)

    def backfn(g):
        return (g / x.data,)

    return _finish(out_data, (x,), backfn, "log")


def square(x: Tensor) -> Tensor:
    out_data = x.data * x.data

    def backfn(g):
        return (g * (2.0 * x.data),)

    return _finish(out_data, (x,), backfn, "square")


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient is 1 inside the closed interval, 0 outside."""
    if lo > hi:
        raise ValueError(f"clip: lo {lo} > hi {hi}")
    out_data = np.clip(x.data, lo, hi)
    passthrough = (x.data >= lo) & (x.data <= hi)

    def backfn(g):
        return (g * passthrough,)

    return _finish(out_data, (x,), backfn, "clip")


def reduce_sum(x: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    out_data = x.data.sum(axis=axes, keepdims=keepdims)

    def backfn(g):
        if axes is not None and not keepdims:
            ax = axes if isinstance(axes, tuple) else (axes,)
            g = np.expand_dims(g, ax)
        return (np.broadcast_to(g, x.shape).astype(x.dtype, copy=False),)

    return _finish(np.asarray(out_data, dtype=x.dtype), (x,), backfn, "reduce_sum")


def reduce_mean(x: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    out_data = x.data.mean(axis=axes, keepdims=keepdims)
    count = x.size if axes is None else np.prod(
        [x.shape[a] for a in (axes if isinstance(axes, tuple) else (axes,))]
    )

    def backfn(g):
        if axes is not None and not keepdims:
            ax = axes if isinstance(axes, tuple) else (axes,)
            g = np.expand_dims(g, ax)
        return (np.broadcast_to(g, x.shape).astype(x.dtype, copy=False) / count,)

    return _finish(np.asarray(out_data, dtype=x.dtype), (x,), backfn, "reduce_mean")


def reshape(x: Tensor, shape) -> Tensor:
    out_data = x.data.reshape(shape)

    def backfn(g):
        return (g.reshape(x.shape),)

    return _finish(out_data, (x,), backfn, "reshape")


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ValueError("concat: empty tensor list")
    first = tensors[0]
    for t in tensors[1:]:
        _check_pair(first, t, "concat")
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backfn(g):
        pieces = np.split(g, splits, axis=axis)
        return tuple(p if t.requires_grad else None for p, t in zip(pieces, tensors))

    return _finish(out_data, tuple(tensors), backfn, "concat")


def detach(x: Tensor) -> Tensor:
    return x.detach()


# ---------------------------------------------------------------------------
# convolution (valid padding only)
# ---------------------------------------------------------------------------


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int):
    """[B,C,H,W] -> ([B, C*kh*kw, H_out*W_out] patch matrix, h_out, w_out)."""
    b, c, h, w = x.shape
    h_out = (h - kh) // stride + 1
    w_out = (w - kw) // stride + 1
    s0, s1, s2, s3 = x.strides
    view = np.lib.stride_tricks.as_strided(
        x,
        shape=(b, c, kh, kw, h_out, w_out),
        strides=(s0, s1, s2, s3, s2 * stride, s3 * stride),
        writeable=False,
    )
    return view.reshape(b, c * kh * kw, h_out * w_out), h_out, w_out


def _col2im(cols: np.ndarray, x_shape, kh: int, kw: int, stride: int) -> np.ndarray:
    """Scatter-add inverse of :func:`_im2col`."""
    b, c, h, w = x_shape
    h_out = (h - kh) // stride + 1
    w_out = (w - kw) // stride + 1
    cols = cols.reshape(b, c, kh, kw, h_out, w_out)
    x = np.zeros(x_shape, dtype=cols.dtype)
    for i in range(kh):
        hi = i + stride * h_out
        for j in range(kw):
            wj = j + stride * w_out
            x[:, :, i:hi:stride, j:wj:stride] += cols[:, :, i, j]
    return x


def _conv_args(x: Tensor, k: Tensor, stride: int, op: str):
    if not isinstance(stride, int) or stride < 1:
        raise ValueError(f"{op}: stride must be a positive int, got {stride!r}")
    _check_pair(x, k, op)
    if k.ndim != 4:
        raise ValueError(f"{op}: kernel must be 4-D, got shape {k.shape}")
    if x.ndim == 3:
        return True
    if x.ndim == 4:
        return False
    raise ValueError(f"{op}: input must be [C,H,W] or [B,C,H,W], got shape {x.shape}")


def conv2d(x: Tensor, k: Tensor, stride: int = 1) -> Tensor:
    """Valid-padding cross-correlation.

    ``x`` is [C_in,H,W] or [B,C_in,H,W]; ``k`` is [C_out,C_in,kh,kw].
    Output spatial size is floor((H-kh)/stride)+1 per axis; the kernel may
    not exceed the input extent.
    """
    single = _conv_args(x, k, stride, "conv2d")
    xd = x.data[None] if single else x.data
    co, ci, kh, kw = k.shape
    b, c, h, w = xd.shape
    if c != ci:
        raise ValueError(f"conv2d channel mismatch: input {c} channels, kernel expects {ci}")
    if kh > h or kw > w:
        raise ValueError(f"conv2d kernel {k.shape[2:]} larger than input {xd.shape[2:]}")
    cols, h_out, w_out = _im2col(xd, kh, kw, stride)
    kmat = k.data.reshape(co, ci * kh * kw)
    out = np.matmul(kmat[None], cols).reshape(b, co, h_out, w_out)

    def backfn(g):
        g = g[None] if single else g
        gmat = g.reshape(b, co, h_out * w_out)
        gx = None
        gk = None
        if x.requires_grad:
            dcols = np.matmul(kmat.T[None], gmat)
            gx = _col2im(dcols, xd.shape, kh, kw, stride)
            if single:
                gx = gx[0]
        if k.requires_grad:
            gk = np.einsum("bol,bkl->ok", gmat, cols).reshape(k.shape)
        return gx, gk

    out_data = out[0] if single else out
    return _finish(out_data, (x, k), backfn, "conv2d")


def conv2d_transpose(x: Tensor, k: Tensor, stride: int = 1) -> Tensor:
    """Transposed (fractionally strided) counterpart of :func:`conv2d`.

    ``x`` is [C_in,H,W] or [B,C_in,H,W]; ``k`` is [C_in,C_out,kh,kw].
    Output spatial size is (H-1)*stride+kh per axis, the exact adjoint of a
    valid conv2d with the same stride.
    """
    single = _conv_args(x, k, stride, "conv2d_transpose")
    xd = x.data[None] if single else x.data
    ci, co, kh, kw = k.shape
    b, c, h, w = xd.shape
    if c != ci:
        raise ValueError(
            f"conv2d_transpose channel mismatch: input {c} channels, kernel expects {ci}"
        )
    h_out = (h - 1) * stride + kh
    w_out = (w - 1) * stride + kw
    kmat = k.data.reshape(ci, co * kh * kw)
    xmat = xd.reshape(b, ci, h * w)
    cols = np.matmul(kmat.T[None], xmat)
    out = _col2im(cols, (b, co, h_out, w_out), kh, kw, stride)

    def backfn(g):
        g = g[None] if single else g
        gcols, _, _ = _im2col(g, kh, kw, stride)
        gx = None
        gk = None
        if x.requires_grad:
            gx = np.matmul(kmat[None], gcols).reshape(xd.shape)
            if single:
                gx = gx[0]
        if k.requires_grad:
            gk = np.einsum("bil,bkl->ik", xmat, gcols).reshape(k.shape)
        return gx, gk

    out_data = out[0] if single else out
    return _finish(out_data, (x, k), backfn, "conv2d_transpose")
