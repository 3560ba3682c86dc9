"""A small tape-free reverse-mode autodiff over numpy arrays.

Every :class:`Tensor` produced by an operation remembers its parents and a
closure that maps the output gradient to parent gradients. :func:`grad`
walks that DAG in reverse topological order.
"""
from __future__ import annotations

from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from ..errors import NumericError, ShapeError

DTYPE = np.float64


def set_default_dtype(dtype) -> None:
    """Switch the dtype used for new tensors (float64 unless told otherwise)."""
    global DTYPE
    DTYPE = np.dtype(dtype).type


class Tensor:
    __slots__ = ("data", "parents", "backward_fn", "op", "name")
    __array_priority__ = 100

    def __init__(self, data, parents: Tuple["Tensor", ...] = (), backward_fn: Optional[Callable] = None,
                 op: str = "leaf", name: Optional[str] = None):
        self.data = np.asarray(data, dtype=DTYPE) if not isinstance(data, np.ndarray) else data
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return self.data.item()

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        label = self.name or self.op
        return f"Tensor({label}, shape={self.shape})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(as_tensor(other), self)

    def __getitem__(self, index):
        return take(self, index)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=DTYPE))


def _checked(out: np.ndarray, op: str, parents, backward_fn) -> Tensor:
    if not np.isfinite(out).all():
        raise NumericError(f"non-finite value produced by op {op!r}")
    return Tensor(out, parents, backward_fn, op)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- primitive ops ----------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data + b.data
    except ValueError as exc:
        raise ShapeError(f"add: cannot broadcast {a.shape} with {b.shape}") from exc
    return _checked(out, "add", (a, b),
                    lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def neg(a: Tensor) -> Tensor:
    return _checked(-a.data, "neg", (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    """Element-wise (Hadamard) product with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data * b.data
    except ValueError as exc:
        raise ShapeError(f"mul: cannot broadcast {a.shape} with {b.shape}") from exc
    return _checked(out, "mul", (a, b),
                    lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    return _checked(a.data @ b.data, "matmul", (a, b),
                    lambda g: (g @ b.data.T, a.data.T @ g))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _checked(a.data * mask, "relu", (a,), lambda g: (g * mask,))


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _checked(out, "sigmoid", (a,), lambda g: (g * out * (1.0 - out),))


def log(a: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    return _checked(out, "log", (a,), lambda g: (g / a.data,))


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    out = np.clip(a.data, lo, hi)
    inside = (a.data >= lo) & (a.data <= hi)
    return _checked(out, "clip", (a,), lambda g: (g * inside,))


def tsum(a: Tensor) -> Tensor:
    return _checked(np.asarray(a.data.sum()), "sum", (a,),
                    lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean(a: Tensor) -> Tensor:
    n = a.data.size
    return _checked(np.asarray(a.data.mean()), "mean", (a,),
                    lambda g: (np.full(a.shape, g / n),))


def reshape(a: Tensor, shape) -> Tensor:
    return _checked(a.data.reshape(shape), "reshape", (a,), lambda g: (g.reshape(a.shape),))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {[t.shape for t in tensors]}") from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _checked(out, "concat", tuple(tensors), backward)


def take(a: Tensor, index) -> Tensor:
    """Basic or integer-array indexing; gradients scatter-add back."""
    out = a.data[index]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return _checked(np.array(out, dtype=a.data.dtype), "take", (a,), backward)


def pad_rows(a: Tensor, rows: int) -> Tensor:
    """Append ``rows`` zero rows below a 2-D tensor."""
    if rows <= 0:
        return a
    out = np.concatenate([a.data, np.zeros((rows, a.shape[1]), dtype=a.data.dtype)])
    n = a.shape[0]
    return _checked(out, "pad_rows", (a,), lambda g: (g[:n],))


# -- reverse pass -----------------------------------------------------------

def _topological(root: Tensor):
    order, seen = [], set()
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
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, wrt: Iterable[Tensor]) -> list:
    """Gradients of scalar ``loss`` with respect to each tensor in ``wrt``.

    Tensors that do not influence the loss get a zero gradient.
    """
    if loss.data.size != 1:
        raise ShapeError(f"loss must be a scalar, got shape {loss.shape}")
    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological(loss)):
        g = grads.get(id(node))
        if g is None or node.backward_fn is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    return [grads.get(id(t), np.zeros_like(t.data)) for t in wrt]


def grad(loss: Tensor, params) -> Dict[str, np.ndarray]:
    """Reverse-mode gradients of ``loss`` for every parameter in ``params``.

    ``params`` is a :class:`~seglink.nn.optim.ParamStore` or a name->Tensor
    mapping. Parameter values are not modified.
    """
    names = list(params.keys())
    tensors = [params[n] for n in names]
    return dict(zip(names, backward(loss, tensors)))
