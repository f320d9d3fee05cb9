"""Reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Tensor` records the operation that produced it. Calling
:func:`grad` on a scalar result walks the recorded graph once in reverse
topological order and accumulates gradients additively into every leaf
that was asked for.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class Tensor:
    """Array value plus the bookkeeping needed for the backward pass."""

    __slots__ = ("value", "parents", "backward_fn", "name")
    __array_priority__ = 100.0

    def __init__(self, value, parents: tuple = (), backward_fn=None, name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.backward_fn = backward_fn
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def size(self) -> int:
        return self.value.size

    def __repr__(self):
        return f"Tensor(shape={self.shape}, value={self.value!r})"

    def __len__(self):
        return len(self.value)

    # arithmetic -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, reciprocal(other))
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))

    def __rtruediv__(self, other):
        return mul(other, reciprocal(self))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __getitem__(self, index):
        return getitem(self, index)

    # convenience ------------------------------------------------------
    def sum(self, axis=None):
        return tsum(self, axis)

    def mean(self, axis=None):
        return tmean(self, axis)

    def relu(self):
        return relu(self)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def square(self):
        return mul(self, self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


_TAPES: list[list[Tensor]] = []


def _make(value, parents, backward_fn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.value = value if isinstance(value, np.ndarray) else np.asarray(value, dtype=np.float64)
    out.parents = parents
    out.backward_fn = backward_fn
    out.name = None
    if _TAPES:
        _TAPES[-1].append(out)
    return out


class Tape:
    """Records every operation created while active, in creation order.

    Creation order is a valid topological order, so a backward pass over a
    tape needs no graph traversal.
    """

    def __init__(self):
        self.nodes: list[Tensor] = []

    def __enter__(self):
        _TAPES.append(self.nodes)
        return self

    def __exit__(self, *exc):
        _TAPES.pop()
        return False


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _make(a.value + b.value, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.value, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.value, b.value
    return _make(av * bv, (a, b),
                 lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def reciprocal(a) -> Tensor:
    a = as_tensor(a)
    out = 1.0 / a.value
    return _make(out, (a,), lambda g: (-g * out * out,))


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    p = float(exponent)
    av = a.value
    return _make(av ** p, (a,), lambda g: (g * p * av ** (p - 1.0),))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.value, b.value
    if av.ndim != 2 or bv.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {av.shape} and {bv.shape}")
    return _make(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def dense(h, params, w_slice: slice, b_slice: slice, shape: tuple[int, int]) -> Tensor:
    """Affine layer ``h @ W + b`` with ``W`` and ``b`` read from a flat vector.

    Fusing the slice/reshape/matmul/add chain into one node keeps the graph
    small; the parameter gradient is scattered straight into a flat array.
    """
    h_is_input = not isinstance(h, Tensor)
    h, params = as_tensor(h), as_tensor(params)
    W = params.value[w_slice].reshape(shape)
    hv = h.value
    n_params = params.size

    def back(g):
        gp = np.zeros(n_params)
        gp[w_slice] = (hv.T @ g).ravel()
        gp[b_slice] = g.sum(axis=0)
        return (None if h_is_input else g @ W.T), gp

    return _make(hv @ W + params.value[b_slice], (h, params), back)


def relu(a) -> Tensor:
    """Rectifier; the derivative at exactly 0 is taken as 0."""
    a = as_tensor(a)
    av = a.value
    return _make(np.maximum(av, 0.0), (a,), lambda g: (g * (av > 0.0),))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.value)
    return _make(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    av = a.value
    return _make(np.log(av), (a,), lambda g: (g / av,))


def tsum(a, axis=None) -> Tensor:
    a = as_tensor(a)
    shape = a.shape

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _make(a.value.sum(axis=axis), (a,), back)


def tmean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    count = a.size if axis is None else a.shape[axis]
    return tsum(a, axis) * (1.0 / count)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    return _make(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))


def _is_basic_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (slice, int, type(None), type(Ellipsis))) for i in items)


def getitem(a, index) -> Tensor:
    a = as_tensor(a)
    shape = a.shape

    basic = _is_basic_index(index)

    def back(g):
        out = np.zeros(shape)
        if basic:
            out[index] = g
        else:
            np.add.at(out, index, g)
        return (out,)

    return _make(a.value[index], (a,), back)


def concatenate(parts: Sequence, axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    sizes = np.cumsum([p.shape[axis] for p in parts])[:-1]
    return _make(np.concatenate([p.value for p in parts], axis=axis), tuple(parts),
                 lambda g: tuple(np.split(g, sizes, axis=axis)))


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def grad(loss: Tensor, wrt: Iterable[Tensor], tape: Tape | None = None) -> list[np.ndarray]:
    """Gradients of a scalar ``loss`` with respect to each tensor in ``wrt``.

    Raises
    ------
    ValueError
        If ``loss`` is not a scalar.
    FloatingPointError
        If the loss or any intermediate gradient is not finite.
    """
    wrt = list(wrt)
    if loss.size != 1:
        raise ValueError(f"loss must be a scalar, got shape {loss.shape}")
    if not np.isfinite(loss.value).all():
        raise FloatingPointError(f"non-finite loss value {float(loss.value)}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
    order = tape.nodes if tape is not None else _toposort(loss)
    for node in reversed(order):
        if node.backward_fn is None:
            continue
        g = grads.get(id(node))
        if g is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if pg is None:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    out = []
    for t in wrt:
        g = grads.get(id(t))
        g = np.zeros(t.shape) if g is None else np.asarray(g, dtype=np.float64).reshape(t.shape)
        if not np.isfinite(g).all():
            raise FloatingPointError("non-finite gradient encountered")
        out.append(g)
    return out


def value_and_grad(fn: Callable[[Tensor], Tensor]) -> Callable[[np.ndarray], tuple[float, np.ndarray]]:
    """Wrap ``fn(theta) -> scalar Tensor`` into ``theta -> (value, gradient)``."""

    def wrapped(theta: np.ndarray):
        leaf = Tensor(np.array(theta, dtype=np.float64))
        with Tape() as tape:
            out = fn(leaf)
        (g,) = grad(out, [leaf], tape)
        return float(out.value), g

    return wrapped
