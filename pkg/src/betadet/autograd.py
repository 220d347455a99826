"""Minimal reverse-mode automatic differentiation over dense float64
arrays: a dynamic tape rebuilt on every forward pass.

Every op checks its output for NaN/Inf and raises NumericError naming
the op, so divergence is caught at the op that produced it. backward()
replays the recorded ops in exact reverse execution order and may be
called once per recorded forward pass.

A graph and its tensors belong to one thread for a forward/backward
episode; independent episodes may run concurrently.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

_LAYERNORM_EPS = 1e-5


class NumericError(ArithmeticError):
    """An op produced NaN or Inf."""


_grad_enabled = True
_seq_counter = 0


class no_grad:
    """Context manager that disables tape recording."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    """Dense float64 array with optional gradient tracking."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn",
                 "_op", "_seq", "_consumed")

    # Make ndarray <op> Tensor dispatch to our reflected operators instead
    # of numpy broadcasting over the Tensor object.
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward_fn = None
        self._op = "leaf"
        self._seq = _next_seq()
        self._consumed = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op}, requires_grad={self.requires_grad})"

    # Operator sugar -------------------------------------------------------
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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return slice_(self, key)


def _next_seq() -> int:
    global _seq_counter
    _seq_counter += 1
    return _seq_counter


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_op(data: np.ndarray, parents: Sequence[Tensor],
            backward_fn: Callable[[np.ndarray], None] | None,
            op: str) -> Tensor:
    """Build an op result; the extension point for custom ops.

    `backward_fn(grad_out)` must accumulate into each parent's .grad
    (parents are guaranteed to have a zeroed .grad buffer when called).
    """
    # One reduction instead of a full isfinite scan: NaN/Inf poison the
    # sum. Values here are desk-scale, so a finite array cannot overflow.
    if not np.isfinite(np.sum(data)):
        raise NumericError(f"op '{op}' produced a non-finite value")
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
        out._op = op
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.requires_grad:
        t.grad += _unbroadcast(g, t.data.shape)


#: Public accumulation helper for custom ops built with make_op.
accumulate = _accum


# ---------------------------------------------------------------------------
# Elementwise arithmetic (numpy broadcasting rules).

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data + b.data

    def backward(g):
        _accum(a, g)
        _accum(b, g)

    return make_op(out, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data - b.data

    def backward(g):
        _accum(a, g)
        _accum(b, -g)

    return make_op(out, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data * b.data

    def backward(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return make_op(out, (a, b), backward, "mul")


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data / b.data

    def backward(g):
        _accum(a, g / b.data)
        _accum(b, -g * a.data / (b.data * b.data))

    return make_op(out, (a, b), backward, "div")


def maximum(a, b) -> Tensor:
    """Elementwise max; ties send the gradient to the first operand."""
    a, b = _as_tensor(a), _as_tensor(b)
    out = np.maximum(a.data, b.data)
    pick_a = a.data >= b.data

    def backward(g):
        _accum(a, g * pick_a)
        _accum(b, g * ~pick_a)

    return make_op(out, (a, b), backward, "maximum")


def minimum(a, b) -> Tensor:
    """Elementwise min; ties send the gradient to the first operand."""
    a, b = _as_tensor(a), _as_tensor(b)
    out = np.minimum(a.data, b.data)
    pick_a = a.data <= b.data

    def backward(g):
        _accum(a, g * pick_a)
        _accum(b, g * ~pick_a)

    return make_op(out, (a, b), backward, "minimum")


def absolute(a) -> Tensor:
    """|a| with subgradient 0 at exactly 0."""
    a = _as_tensor(a)
    out = np.abs(a.data)
    sign = np.sign(a.data)

    def backward(g):
        _accum(a, g * sign)

    return make_op(out, (a,), backward, "abs")


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient is zero outside the open interval."""
    a = _as_tensor(a)
    out = np.clip(a.data, lo, hi)
    inside = (a.data > lo) & (a.data < hi)

    def backward(g):
        _accum(a, g * inside)

    return make_op(out, (a,), backward, "clip")


# ---------------------------------------------------------------------------
# Linear algebra and shape ops.

def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = np.matmul(a.data, b.data)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        _accum(a, ga)
        _accum(b, gb)

    return make_op(out, (a, b), backward, "matmul")


def linear(x, w, b) -> Tensor:
    """Fused x @ w + b (bias broadcast over leading dims)."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    out = np.matmul(x.data, w.data) + b.data

    def backward(g):
        _accum(x, np.matmul(g, np.swapaxes(w.data, -1, -2)))
        _accum(w, np.matmul(np.swapaxes(x.data, -1, -2), g))
        _accum(b, g)

    return make_op(out, (x, w, b), backward, "linear")


def transpose(a, axes: Sequence[int] | None = None) -> Tensor:
    a = _as_tensor(a)
    out = np.transpose(a.data, axes)
    if axes is None:
        inv = None
    else:
        inv = np.argsort(axes)

    def backward(g):
        _accum(a, np.transpose(g, inv))

    return make_op(out, (a,), backward, "transpose")


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = _as_tensor(a)
    out = a.data.reshape(shape)

    def backward(g):
        _accum(a, g.reshape(a.data.shape))

    return make_op(out, (a,), backward, "reshape")


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(ts, np.split(g, splits, axis=axis)):
            _accum(t, piece)

    return make_op(out, tuple(ts), backward, "concat")


def slice_(a, key) -> Tensor:
    """Basic (non-repeating) indexing; backward scatters into zeros."""
    a = _as_tensor(a)
    out = a.data[key]

    def backward(g):
        buf = np.zeros_like(a.data)
        buf[key] = g
        _accum(a, buf)

    return make_op(out, (a,), backward, "slice")


def take(a, indices, axis: int = 0) -> Tensor:
    """Gather along axis 0 with possibly repeated integer indices."""
    if axis != 0:
        raise ValueError("take supports axis=0 only")
    a = _as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    out = a.data[idx]

    def backward(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, idx, g)
        _accum(a, buf)

    return make_op(out, (a,), backward, "take")


def sum_(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape))
        else:
            ge = g if keepdims else np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(ge, a.data.shape))

    return make_op(out, (a,), backward, "sum")


def mean_(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    n = a.data.size if axis is None else a.data.shape[axis]

    def backward(g):
        if axis is None:
            _accum(a, np.broadcast_to(g / n, a.data.shape))
        else:
            ge = g if keepdims else np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(ge / n, a.data.shape))

    return make_op(out, (a,), backward, "mean")


# ---------------------------------------------------------------------------
# Nonlinearities.

def relu(a) -> Tensor:
    a = _as_tensor(a)
    out = np.maximum(a.data, 0.0)
    mask = a.data > 0.0

    def backward(g):
        _accum(a, g * mask)

    return make_op(out, (a,), backward, "relu")


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    x = a.data
    out = np.where(x >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def backward(g):
        _accum(a, g * out * (1.0 - out))

    return make_op(out, (a,), backward, "sigmoid")


def softplus(a) -> Tensor:
    """ln(1 + e^x), computed stably as max(x, 0) + log1p(e^-|x|)."""
    a = _as_tensor(a)
    x = a.data
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    sig = np.where(x >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def backward(g):
        _accum(a, g * sig)

    return make_op(out, (a,), backward, "softplus")


def log(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)

    def backward(g):
        _accum(a, g / a.data)

    return make_op(out, (a,), backward, "log")


def exp(a) -> Tensor:
    a = _as_tensor(a)
    out = np.exp(a.data)

    def backward(g):
        _accum(a, g * out)

    return make_op(out, (a,), backward, "exp")


def sqrt(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(invalid="ignore"):
        out = np.sqrt(a.data)

    def backward(g):
        _accum(a, g * 0.5 / out)

    return make_op(out, (a,), backward, "sqrt")


def softmax(a) -> Tensor:
    """Softmax over the last dimension."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        _accum(a, out * (g - dot))

    return make_op(out, (a,), backward, "softmax")


def layernorm(a, gain, bias) -> Tensor:
    """Layer normalization over the last dimension with learned scale/shift."""
    a, gain, bias = _as_tensor(a), _as_tensor(gain), _as_tensor(bias)
    x = a.data
    n = x.shape[-1]
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + _LAYERNORM_EPS)
    xhat = xc * inv_std
    out = xhat * gain.data + bias.data

    def backward(g):
        _accum(gain, (g * xhat).reshape(-1, n).sum(axis=0))
        _accum(bias, g.reshape(-1, n).sum(axis=0))
        gx = g * gain.data
        dx = inv_std * (
            gx
            - gx.mean(axis=-1, keepdims=True)
            - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
        )
        _accum(a, dx)

    return make_op(out, (a, gain, bias), backward, "layernorm")


# ---------------------------------------------------------------------------
# Backward pass.

def backward(loss: Tensor) -> None:
    """Populate .grad on every requires_grad tensor reachable from loss."""
    if loss.data.ndim != 0:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
    if loss._consumed:
        raise RuntimeError("backward already ran for this forward pass; re-run forward first")

    nodes: list[Tensor] = []
    seen: set[int] = set()
    stack = [loss]
    while stack:
        t = stack.pop()
        if id(t) in seen or not t.requires_grad:
            continue
        seen.add(id(t))
        nodes.append(t)
        stack.extend(t._parents)

    nodes.sort(key=lambda t: t._seq, reverse=True)
    for t in nodes:
        t.grad = np.zeros_like(t.data)
    loss.grad = np.ones_like(loss.data)
    for t in nodes:
        if t._backward_fn is not None:
            t._backward_fn(t.grad)
    loss._consumed = True


# ---------------------------------------------------------------------------
# Optimizer.

class AdamState:
    """Per-parameter first/second moments plus the shared step counter."""

    def __init__(self, params: Sequence[Tensor], beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8,
                 clip_norm: float = 1.0):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]


def adam_step(params: Sequence[Tensor], state: AdamState, lr: float) -> None:
    """One Adam update with global gradient-norm clipping applied first."""
    grads = []
    for p in params:
        if p.grad is None:
            raise ValueError("adam_step called with a parameter missing its gradient")
        grads.append(p.grad)

    sq = 0.0
    for g in grads:
        sq += float((g * g).sum())
    norm = math.sqrt(sq)
    scale = state.clip_norm / norm if norm > state.clip_norm else 1.0

    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        gc = g * scale
        m *= state.beta1
        m += (1.0 - state.beta1) * gc
        v *= state.beta2
        v += (1.0 - state.beta2) * gc * gc
        mhat = m / bc1
        vhat = v / bc2
        p.data -= lr * mhat / (np.sqrt(vhat) + state.eps)
