"""Reverse-mode automatic differentiation over dense float64 arrays.

The engine records a dynamic operation graph while expressions are
built: every operation returns a new :class:`Tensor` that keeps
references to its inputs together with a closure routing the output
gradient back to them.  Calling ``backward()`` on a scalar result walks
the recorded graph once in reverse topological order and accumulates
gradients into every tensor on a differentiable path.

All arithmetic is 64-bit; there is no global state, so independent
graphs can be built concurrently as long as each individual graph is
used from a single thread.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.special import expit as _expit

from .errors import ShapeError

Array = np.ndarray


def _as_f64(data) -> Array:
    return np.asarray(data, dtype=np.float64)


class Tensor:
    """Dense float64 array plus an optional gradient buffer.

    ``data`` is stored row-major; ``grad`` has the same shape and is
    allocated lazily during backward (parameters preallocate it so that
    optimizers can always read it).
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = _as_f64(data)
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[], None] | None = None

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # -- gradient machinery ---------------------------------------------------

    def _accumulate(self, g: Array) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad[...] = 0.0

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable tensor's grad.

        Only defined for scalar results.  Uses an iterative topological
        sort; recorded graphs routinely exceed Python's recursion limit.
        """
        if self.data.size != 1:
            raise ShapeError("backward() requires a scalar tensor")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    # -- operator sugar --------------------------------------------------------

    def __add__(self, other):
        return add(self, _wrap(other))

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, _wrap(other))

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return add(self, neg(_wrap(other)))

    def __rsub__(self, other):
        return add(_wrap(other), neg(self))

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def sum(self):
        return tsum(self)


class Parameter(Tensor):
    """Named trainable tensor; the unit the optimizer and checkpoints see."""

    def __init__(self, data, name: str):
        super().__init__(data, requires_grad=True, name=name)
        self.grad = np.zeros_like(self.data)


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(data: Array, parents: Sequence[Tensor], backward: Callable[[], None]) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- elementwise -----------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def backward():
        g = out.grad
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    out = _make(out_data, (a, b), backward)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def backward():
        g = out.grad
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    out = _make(out_data, (a, b), backward)
    return out


def neg(a: Tensor) -> Tensor:
    def backward():
        a._accumulate(-out.grad)

    out = _make(-a.data, (a,), backward)
    return out


def sigmoid(a: Tensor) -> Tensor:
    s = _expit(a.data)

    def backward():
        a._accumulate(out.grad * s * (1.0 - s))

    out = _make(s, (a,), backward)
    return out


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)

    def backward():
        a._accumulate(out.grad * (1.0 - t * t))

    out = _make(t, (a,), backward)
    return out


def relu(a: Tensor) -> Tensor:
    def backward():
        a._accumulate(out.grad * (a.data > 0.0))

    out = _make(np.maximum(a.data, 0.0), (a,), backward)
    return out


# -- linear algebra ----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim == 2 and b.data.ndim == 1:
        if a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul {a.shape} @ {b.shape}")

        def backward():
            g = out.grad
            if a.requires_grad:
                a._accumulate(np.outer(g, b.data))
            if b.requires_grad:
                b._accumulate(a.data.T @ g)

    elif a.data.ndim == 2 and b.data.ndim == 2:
        if a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul {a.shape} @ {b.shape}")

        def backward():
            g = out.grad
            if a.requires_grad:
                a._accumulate(g @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ g)

    elif a.data.ndim == 1 and b.data.ndim == 2:
        if a.shape[0] != b.shape[0]:
            raise ShapeError(f"matmul {a.shape} @ {b.shape}")

        def backward():
            g = out.grad
            if a.requires_grad:
                a._accumulate(b.data @ g)
            if b.requires_grad:
                b._accumulate(np.outer(a.data, g))

    else:
        raise ShapeError(f"unsupported matmul ranks {a.shape} @ {b.shape}")
    out = _make(a.data @ b.data, (a, b), backward)
    return out


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {a.shape}")

    def backward():
        a._accumulate(out.grad.T)

    out = _make(a.data.T.copy(), (a,), backward)
    return out


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    def backward():
        a._accumulate(out.grad.reshape(a.shape))

    out = _make(a.data.reshape(shape).copy(), (a,), backward)
    return out


# -- assembly ----------------------------------------------------------------


def concat(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate 1-D tensors along their only axis."""
    if not parts:
        raise ShapeError("concat of no tensors")
    for p in parts:
        if p.data.ndim != 1:
            raise ShapeError(f"concat expects vectors, got shape {p.shape}")
    sizes = [p.size for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward():
        g = out.grad
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                p._accumulate(g[lo:hi])

    out = _make(np.concatenate([p.data for p in parts]), parts, backward)
    return out


def stack(rows_: Sequence[Tensor]) -> Tensor:
    """Stack equal-length 1-D tensors into a matrix, one per row."""
    if not rows_:
        raise ShapeError("stack of no tensors")
    width = rows_[0].size
    for r in rows_:
        if r.data.ndim != 1 or r.size != width:
            raise ShapeError("stack expects equal-length vectors")

    def backward():
        g = out.grad
        for i, r in enumerate(rows_):
            if r.requires_grad:
                r._accumulate(g[i])

    out = _make(np.stack([r.data for r in rows_]), rows_, backward)
    return out


def row(a: Tensor, i: int) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"row expects a matrix, got shape {a.shape}")

    def backward():
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        a.grad[i] += out.grad

    out = _make(a.data[i].copy(), (a,), backward)
    return out


def rows(a: Tensor, lo: int, hi: int) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"rows expects a matrix, got shape {a.shape}")

    def backward():
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        a.grad[lo:hi] += out.grad

    out = _make(a.data[lo:hi].copy(), (a,), backward)
    return out


def element(a: Tensor, i: int, j: int) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"element expects a matrix, got shape {a.shape}")

    def backward():
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        a.grad[i, j] += out.grad

    out = _make(np.array(a.data[i, j]), (a,), backward)
    return out


def pick(a: Tensor, cols) -> Tensor:
    """Gather one entry per row: result[i] = a[i, cols[i]]."""
    if a.data.ndim != 2:
        raise ShapeError(f"pick expects a matrix, got shape {a.shape}")
    cols = np.asarray(cols, dtype=np.int64)
    if cols.shape != (a.shape[0],):
        raise ShapeError(f"pick needs one column per row, got {cols.shape}")
    if np.any(cols < 0) or np.any(cols >= a.shape[1]):
        raise IndexError("pick column index out of range")
    idx = np.arange(a.shape[0])

    def backward():
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        np.add.at(a.grad, (idx, cols), out.grad)

    out = _make(a.data[idx, cols].copy(), (a,), backward)
    return out


# -- reductions ----------------------------------------------------------------


def tsum(a: Tensor) -> Tensor:
    def backward():
        a._accumulate(np.broadcast_to(out.grad, a.shape).copy())

    out = _make(np.array(a.data.sum()), (a,), backward)
    return out


def logsumexp(a: Tensor, axis: int | None = None) -> Tensor:
    """Stable log(sum(exp(a))) over one axis or all elements.

    The max shift keeps the forward value finite for any finite input;
    the gradient is the softmax of ``a`` along the reduced axis.
    """
    if a.data.size == 0:
        raise ShapeError("logsumexp of an empty tensor")
    if axis is None:
        m = a.data.max()
        e = np.exp(a.data - m)
        z = e.sum()
        out_data = np.array(m + np.log(z))

        def backward():
            a._accumulate(out.grad * (e / z))

    else:
        m = a.data.max(axis=axis, keepdims=True)
        e = np.exp(a.data - m)
        z = e.sum(axis=axis, keepdims=True)
        out_data = (m + np.log(z)).squeeze(axis=axis)

        def backward():
            g = np.expand_dims(out.grad, axis)
            a._accumulate(g * (e / z))

    out = _make(out_data, (a,), backward)
    return out


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero with probability ``rate``, scale survivors."""
    keep = rng.random(a.shape) >= rate
    scale = 1.0 / (1.0 - rate)
    factor = keep * scale

    def backward():
        a._accumulate(out.grad * factor)

    out = _make(a.data * factor, (a,), backward)
    return out


# -- plain-array helpers --------------------------------------------------------


def log_sum_exp(values) -> float:
    """Stable log(sum(exp(v))) of a nonempty 1-D array, as a float."""
    v = _as_f64(values).ravel()
    if v.size == 0:
        raise ValueError("log_sum_exp of an empty sequence")
    m = v.max()
    return float(m + np.log(np.exp(v - m).sum()))


def zero_grads(params: Sequence[Tensor]) -> None:
    for p in params:
        p.zero_grad()
