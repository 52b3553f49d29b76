"""Dense tensors with reverse-mode automatic differentiation.

Values live in numpy arrays (float64 by default); every differentiable
operation records how to push gradients back to its operands, and
``backward`` replays those records in reverse topological order.

Policies:
  - any NaN/Inf produced by an op raises ``NonFiniteError`` immediately;
  - tensors are never mutated by ops (leaf parameters are mutated only by
    an optimizer, between steps);
  - a second ``backward`` through the same loss raises (the tape is
    consumed on replay).
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf as _erf, expit as _expit


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested op."""


class NonFiniteError(FloatingPointError):
    """An op produced NaN or Inf."""


class TapeError(RuntimeError):
    """backward() called on an unusable loss (detached, non-scalar, or spent)."""


_default_dtype = np.float64
_grad_enabled = True


def set_default_dtype(dtype) -> None:
    """Set the dtype new tensors are created with.

    float64 is the supported default; float32 trades the gradient-check
    guarantees for speed and is excluded from those tests.
    """
    global _default_dtype
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {dtype!r}")
    _default_dtype = dt.type


def default_dtype():
    return _default_dtype


@contextmanager
def no_grad():
    """Disable tape recording inside the block (evaluation passes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _ensure_finite(arr: np.ndarray, op: str) -> None:
    # NaN/Inf propagate through the sum, so one reduction checks the array.
    if not np.isfinite(arr.sum()):
        raise NonFiniteError(f"non-finite value produced by {op!r}")


class Tensor:
    """A dense n-dimensional array with an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "op", "parents", "_backward", "_spent")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=_default_dtype, copy=True)
        _ensure_finite(arr, "tensor")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.op: str | None = None
        self.parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], tuple] | None = None
        self._spent = False

    # -- construction helpers ------------------------------------------------

    @classmethod
    def zeros(cls, shape, requires_grad: bool = False) -> "Tensor":
        return cls(np.zeros(shape, dtype=_default_dtype), requires_grad)

    @classmethod
    def ones(cls, shape, requires_grad: bool = False) -> "Tensor":
        return cls(np.ones(shape, dtype=_default_dtype), requires_grad)

    @classmethod
    def randn(cls, shape, rng: np.random.Generator, std: float = 1.0,
              requires_grad: bool = False) -> "Tensor":
        return cls(rng.standard_normal(shape) * std, requires_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # -- autodiff ------------------------------------------------------------

    def backward(self) -> None:
        backward(self)

    # -- operator sugar (constants auto-wrap as non-grad tensors) -------------

    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __getitem__(self, key):
        return take(self, key)

    # -- method sugar ----------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes=None):
        return transpose(self, axes)

    def mean(self, axis=None, keepdims: bool = False):
        return mean(self, axis, keepdims)

    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis, keepdims)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=_default_dtype))


def _make(op: str, data: np.ndarray, parents: tuple[Tensor, ...],
          backward_fn: Callable[[np.ndarray], tuple]) -> Tensor:
    """Build an op result, recording the backward rule when grads are live."""
    _ensure_finite(data, op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.op = op
    out._spent = False
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = parents
        out._backward = backward_fn
    else:
        out.requires_grad = False
        out.parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient back down to the shape it was broadcast from."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# -- computation tape ---------------------------------------------------------


class ComputationTape:
    """Topologically ordered record of the ops that produced a tensor.

    Entry i's operands were all produced by some entry j < i or are leaves,
    so a reverse walk adds each tensor's gradient contribution exactly once
    per use.
    """

    def __init__(self, entries: list[Tensor]):
        self.entries = entries

    @classmethod
    def trace(cls, root: Tensor) -> "ComputationTape":
        entries: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                entries.append(node)
                continue
            if id(node) in seen or node._backward is None:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                stack.append((p, False))
        return cls(entries)

    def replay_backward(self, root: Tensor) -> None:
        root.grad = np.ones_like(root.data)
        for node in reversed(self.entries):
            if node.grad is None:
                continue  # result never fed the loss
            grads = node._backward(node.grad)
            for parent, g in zip(node.parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += g
            node._backward = None  # consume the tape as we go


def backward(loss: Tensor) -> None:
    """Populate .grad of every requires_grad leaf with d(loss)/d(leaf)."""
    if loss.data.size != 1:
        raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._spent:
        raise TapeError("backward already ran through this loss")
    tape = ComputationTape.trace(loss)
    if not tape.entries:
        raise TapeError("loss is not connected to any recorded operation")
    loss._spent = True
    tape.replay_backward(loss)


# -- primitive ops -------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    """Element-wise a + b; numpy broadcasting, gradients summed back."""
    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return _make("add", a.data + b.data, (a, b), back)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return _make("sub", a.data - b.data, (a, b), back)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def back(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)
    return _make("mul", a.data * b.data, (a, b), back)


def div(a: Tensor, b: Tensor) -> Tensor:
    def back(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb
    return _make("div", a.data / b.data, (a, b), back)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)

    def back(g):
        return (g * s,)
    return _make("scale", a.data * s, (a,), back)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} vs {b.shape}")

    def back(g):
        ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb
    return _make("matmul", np.matmul(a.data, b.data), (a, b), back)


def transpose(a: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    if axes is None:
        axes = tuple(range(a.ndim - 1, -1, -1))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def back(g):
        return (np.transpose(g, inverse),)
    return _make("transpose", np.transpose(a.data, axes), (a,), back)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    old = a.shape

    def back(g):
        return (g.reshape(old),)
    return _make("reshape", a.data.reshape(shape), (a,), back)


def take(a: Tensor, key) -> Tensor:
    """Basic slicing (ints, slices, ellipsis, tuples thereof)."""
    if isinstance(key, (list, np.ndarray)) or (
            isinstance(key, tuple) and any(isinstance(k, (list, np.ndarray)) for k in key)):
        raise TypeError("only basic indexing is supported")

    def back(g):
        buf = np.zeros_like(a.data)
        buf[key] += g
        return (buf,)
    return _make("slice", a.data[key].copy(), (a,), back)


def concat(parts: Iterable[Tensor], axis: int = 0) -> Tensor:
    parts = list(parts)
    shapes = [p.shape for p in parts]
    base = list(shapes[0])
    for s in shapes[1:]:
        ref, other = base.copy(), list(s)
        ref[axis] = other[axis] = 0
        if ref != other:
            raise ShapeError(f"concat non-axis dims differ: {shapes}")
    sizes = [s[axis] for s in shapes]
    bounds = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, bounds, axis=axis))
    return _make("concat", np.concatenate([p.data for p in parts], axis=axis),
                 tuple(parts), back)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def back(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)
    return _make("sum", a.data.sum(axis=axis, keepdims=keepdims), (a,), back)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.size if axis is None else a.shape[axis]

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape) / count,)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape) / count,)
    return _make("mean", a.data.mean(axis=axis, keepdims=keepdims), (a,), back)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-subtracted softmax along ``axis``; slices sum to 1."""
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        inner = (g * s).sum(axis=axis, keepdims=True)
        return (s * (g - inner),)
    return _make("softmax", s, (x,), back)


def sigmoid(x: Tensor) -> Tensor:
    s = _expit(x.data)

    def back(g):
        return (g * s * (1.0 - s),)
    return _make("sigmoid", s, (x,), back)


def gelu(x: Tensor) -> Tensor:
    """Exact (erf-based) GELU: 0.5 * x * (1 + erf(x / sqrt(2)))."""
    phi = 0.5 * (1.0 + _erf(x.data / np.sqrt(2.0)))
    out = x.data * phi

    def back(g):
        pdf = np.exp(-0.5 * x.data * x.data) / np.sqrt(2.0 * np.pi)
        return (g * (phi + x.data * pdf),)
    return _make("gelu", out, (x,), back)


def exp(x: Tensor) -> Tensor:
    e = np.exp(x.data)

    def back(g):
        return (g * e,)
    return _make("exp", e, (x,), back)


def log(x: Tensor) -> Tensor:
    def back(g):
        return (g / x.data,)
    return _make("log", np.log(x.data), (x,), back)


def sqrt(x: Tensor) -> Tensor:
    r = np.sqrt(x.data)

    def back(g):
        return (g / (2.0 * r),)
    return _make("sqrt", r, (x,), back)


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient passes through the interior only."""
    inside = (x.data >= lo) & (x.data <= hi)

    def back(g):
        return (g * inside,)
    return _make("clip", np.clip(x.data, lo, hi), (x,), back)


# -- finite-difference oracle ---------------------------------------------------


def finite_diff_grad(f: Callable[[Tensor], Tensor | float], x: Tensor,
                     eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient estimate of scalar-valued f at x."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    base = x.data
    out = np.zeros_like(base)
    flat_out = out.reshape(-1)
    for i in range(base.size):
        bumped = base.copy().reshape(-1)
        bumped[i] += eps
        hi = f(Tensor(bumped.reshape(base.shape)))
        bumped[i] -= 2.0 * eps
        lo = f(Tensor(bumped.reshape(base.shape)))
        hi = hi.item() if isinstance(hi, Tensor) else float(hi)
        lo = lo.item() if isinstance(lo, Tensor) else float(lo)
        flat_out[i] = (hi - lo) / (2.0 * eps)
    return out


def gradcheck(f: Callable[[Tensor], Tensor], x: np.ndarray, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error is |analytic - fd| / max(1, |fd|) per element; the
    caller asserts against its tolerance.
    """
    leaf = Tensor(x, requires_grad=True)
    loss = f(leaf)
    backward(loss)
    analytic = leaf.grad.copy() if leaf.grad is not None else np.zeros_like(leaf.data)
    fd = finite_diff_grad(f, Tensor(x), eps)
    rel = np.abs(analytic - fd) / np.maximum(1.0, np.abs(fd))
    return float(rel.max())
