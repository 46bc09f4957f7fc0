"""Dense tensors with reverse-mode automatic differentiation.

Every op builds a node holding its output array, its parents and a closure that
maps the output gradient to parent gradients. :func:`backward` walks the graph
in reverse topological order.

Broadcasting is deliberately limited: binary elementwise ops accept operands of
identical shape, or one operand of shape ``()``. Anything else (adding a bias
row, repeating along an axis) has an explicit op.
"""

from __future__ import annotations

import logging
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import NumericalError, ShapeError

logger = logging.getLogger(__name__)

_DEBUG = False
_DTYPE = np.float64


def set_debug(flag: bool) -> None:
    """Enable finiteness checks on every op output."""
    global _DEBUG
    _DEBUG = bool(flag)


def set_default_dtype(dtype) -> None:
    global _DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise ValueError(f"unsupported dtype {dtype}")
    _DTYPE = dtype.type


def default_dtype():
    return _DTYPE


class Tensor:
    """An immutable array plus the bookkeeping needed for backprop."""

    __slots__ = ("data", "grad", "requires_grad", "op", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None,
                 _parents: tuple = (), _backward: Callable | None = None, op: str = "leaf"):
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self.op = op
        self.name = name
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self.op}{label})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None):
        return sum_(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)


def tensor(data, requires_grad: bool = False, name: str | None = None) -> Tensor:
    return Tensor(np.array(data, dtype=_DTYPE), requires_grad=requires_grad, name=name)


def constant(data) -> Tensor:
    return data if isinstance(data, Tensor) else Tensor(np.asarray(data, dtype=_DTYPE))


def _make(data: np.ndarray, parents: tuple, backward: Callable, op: str) -> Tensor:
    if _DEBUG and not np.all(np.isfinite(data)):
        raise NumericalError(f"non-finite values produced by {op}")
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=parents, _backward=backward, op=op)
    return Tensor(data, op=op)


# --------------------------------------------------------------------------
# elementwise

def _binary_operands(a, b, op: str) -> tuple[Tensor, Tensor]:
    a, b = constant(a), constant(b)
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")
    return a, b


def _reduce_to(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return np.asarray(grad.sum()).reshape(shape)


def add(a, b) -> Tensor:
    a, b = _binary_operands(a, b, "add")

    def backward(g):
        return _reduce_to(g, a.shape), _reduce_to(g, b.shape)

    return _make(a.data + b.data, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = _binary_operands(a, b, "sub")

    def backward(g):
        return _reduce_to(g, a.shape), _reduce_to(-g, b.shape)

    return _make(a.data - b.data, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    a, b = _binary_operands(a, b, "mul")

    def backward(g):
        return _reduce_to(g * b.data, a.shape), _reduce_to(g * a.data, b.shape)

    return _make(a.data * b.data, (a, b), backward, "mul")


def div(a, b) -> Tensor:
    a, b = _binary_operands(a, b, "div")
    out = a.data / b.data

    def backward(g):
        return _reduce_to(g / b.data, a.shape), _reduce_to(-g * out / b.data, b.shape)

    return _make(out, (a, b), backward, "div")


def neg(x) -> Tensor:
    x = constant(x)
    return _make(-x.data, (x,), lambda g: (-g,), "neg")


def scale(x, c: float) -> Tensor:
    x = constant(x)
    c = float(c)
    return _make(x.data * c, (x,), lambda g: (g * c,), "scale")


def exp(x) -> Tensor:
    x = constant(x)
    out = np.exp(x.data)
    return _make(out, (x,), lambda g: (g * out,), "exp")


def log(x) -> Tensor:
    x = constant(x)
    return _make(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def tanh(x) -> Tensor:
    x = constant(x)
    out = np.tanh(x.data)
    return _make(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(x) -> Tensor:
    x = constant(x)
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _make(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def relu(x) -> Tensor:
    x = constant(x)
    on = x.data > 0
    return _make(np.where(on, x.data, 0.0), (x,), lambda g: (g * on,), "relu")


def square(x) -> Tensor:
    x = constant(x)
    return _make(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,), "square")


def sqrt(x) -> Tensor:
    x = constant(x)
    out = np.sqrt(x.data)
    return _make(out, (x,), lambda g: (0.5 * g / out,), "sqrt")


def clamp_min(x, lo: float) -> Tensor:
    """max(x, lo); the gradient is passed only where x > lo."""
    x = constant(x)
    on = x.data > lo
    if not on.all():
        logger.debug("clamp_min: %d entries clamped to %g", int((~on).sum()), lo)
    return _make(np.where(on, x.data, lo), (x,), lambda g: (g * on,), "clamp_min")


_UNARY = {"tanh": tanh, "relu": relu, "square": square, "exp": exp, "log": log,
          "sigmoid": sigmoid, "sqrt": sqrt, "neg": neg}
_BINARY = {"add": add, "sub": sub, "mul": mul, "div": div}


def elementwise(op: str, *inputs, factor: float | None = None) -> Tensor:
    """Dispatch an elementwise op by name (``scale`` takes ``factor``)."""
    if op == "scale":
        return scale(inputs[0], factor)
    if op in _UNARY:
        return _UNARY[op](*inputs)
    if op in _BINARY:
        return _BINARY[op](*inputs)
    raise ValueError(f"unknown elementwise op {op!r}")


# --------------------------------------------------------------------------
# linear algebra and shape

def matmul(a, b) -> Tensor:
    """2-D product, or a batched product of two 3-D tensors with equal batch size."""
    a, b = constant(a), constant(b)
    ok = (a.ndim == b.ndim == 2 and a.shape[1] == b.shape[0]) or (
        a.ndim == b.ndim == 3 and a.shape[0] == b.shape[0] and a.shape[2] == b.shape[1])
    if not ok:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2) if a.requires_grad else None
        gb = np.swapaxes(a.data, -1, -2) @ g if b.requires_grad else None
        return ga, gb

    return _make(a.data @ b.data, (a, b), backward, "matmul")


def transpose(x, axes=None) -> Tensor:
    x = constant(x)
    axes = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _make(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),), "transpose")


def reshape(x, shape) -> Tensor:
    x = constant(x)
    src = x.shape
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(src),), "reshape")


def _is_basic_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (slice, int, np.integer)) or i is Ellipsis or i is None for i in items)


def getitem(x, index) -> Tensor:
    x = constant(x)
    basic = _is_basic_index(index)

    def backward(g):
        full = np.zeros_like(x.data)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return _make(np.array(x.data[index]), (x,), backward, "getitem")


def take_rows(table, indices) -> Tensor:
    """Gather rows of a 2-D table; gradient scatters back with accumulation."""
    table = constant(table)
    idx = np.asarray(indices, dtype=np.int64)

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, idx, g)
        return (full,)

    return _make(table.data[idx], (table,), backward, "take_rows")


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [constant(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, cuts, axis=axis))

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward, "concat")


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [constant(t) for t in tensors]

    def backward(g):
        return tuple(np.moveaxis(g, axis, 0))

    return _make(np.stack([t.data for t in tensors], axis=axis), tuple(tensors), backward, "stack")


def expand(x, n: int, axis: int = -1) -> Tensor:
    """Insert a new axis and repeat ``n`` times along it."""
    x = constant(x)
    ax = axis if axis >= 0 else x.ndim + 1 + axis
    out = np.repeat(np.expand_dims(x.data, ax), n, axis=ax)
    return _make(out, (x,), lambda g: (g.sum(axis=ax),), "expand")


def add_bias(x, b) -> Tensor:
    """Add a vector to every row along the last axis of ``x``."""
    x, b = constant(x), constant(b)
    if b.ndim != 1 or x.shape[-1] != b.shape[0]:
        raise ShapeError(f"add_bias: cannot add {b.shape} to rows of {x.shape}")
    lead = tuple(range(x.ndim - 1))
    return _make(x.data + b.data, (x, b), lambda g: (g, g.sum(axis=lead)), "add_bias")


# --------------------------------------------------------------------------
# reductions

def _check_axis(x: Tensor, axis) -> int | None:
    if axis is None:
        return None
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"axis {axis} out of range for shape {x.shape}")
    return axis % x.ndim


def sum_(x, axis=None) -> Tensor:
    x = constant(x)
    ax = _check_axis(x, axis)

    def backward(g):
        if ax is None:
            return (np.full(x.shape, g, dtype=x.data.dtype),)
        return (np.repeat(np.expand_dims(g, ax), x.shape[ax], axis=ax),)

    return _make(np.asarray(x.data.sum(axis=ax)), (x,), backward, "sum")


def mean(x, axis=None) -> Tensor:
    x = constant(x)
    ax = _check_axis(x, axis)
    n = x.data.size if ax is None else x.shape[ax]
    return scale(sum_(x, ax), 1.0 / n)


def max_(x, axis: int) -> Tensor:
    """Max over an axis; ties route the gradient to the first maximiser."""
    x = constant(x)
    ax = _check_axis(x, axis)
    arg = np.argmax(x.data, axis=ax)
    out = np.take_along_axis(x.data, np.expand_dims(arg, ax), axis=ax).squeeze(ax)

    def backward(g):
        full = np.zeros_like(x.data)
        np.put_along_axis(full, np.expand_dims(arg, ax), np.expand_dims(g, ax), axis=ax)
        return (full,)

    return _make(out, (x,), backward, "max")


def l2norm(x, axis: int = -1) -> Tensor:
    """Euclidean norm over ``axis``. The gradient at a zero vector is taken as zero."""
    x = constant(x)
    ax = _check_axis(x, axis)
    out = np.sqrt(np.sum(x.data * x.data, axis=ax))

    def backward(g):
        safe = np.where(out > 0, out, 1.0)
        coef = np.where(out > 0, g / safe, 0.0)
        return (x.data * np.expand_dims(coef, ax),)

    return _make(out, (x,), backward, "l2norm")


def reduce(op: str, x, axis=None) -> Tensor:
    if op == "sum":
        return sum_(x, axis)
    if op == "mean":
        return mean(x, axis)
    if op in ("max", "max-over-axis"):
        return max_(x, -1 if axis is None else axis)
    if op == "l2norm":
        return l2norm(x, -1 if axis is None else axis)
    raise ValueError(f"unknown reduction {op!r}")


def softmax(x, axis: int = -1) -> Tensor:
    x = constant(x)
    if x.data.size == 0:
        raise ShapeError("softmax of an empty tensor")
    ax = _check_axis(x, axis)
    z = x.data - x.data.max(axis=ax, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=ax, keepdims=True)

    def backward(g):
        return (out * (g - np.sum(g * out, axis=ax, keepdims=True)),)

    return _make(out, (x,), backward, "softmax")


def log_softmax(x, axis: int = -1) -> Tensor:
    x = constant(x)
    if x.data.size == 0:
        raise ShapeError("log_softmax of an empty tensor")
    ax = _check_axis(x, axis)
    z = x.data - x.data.max(axis=ax, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=ax, keepdims=True))
    out = z - lse

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=ax, keepdims=True),)

    return _make(out, (x,), backward, "log_softmax")


# --------------------------------------------------------------------------
# backward pass

class ComputeGraph:
    """Topologically ordered view of every node reachable from an output."""

    def __init__(self, output: Tensor):
        self.output = output
        self.nodes = _toposort(output)

    def backward(self) -> dict:
        loss = self.output
        if loss.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g = grads.get(id(node))
            node.grad = g if g is not None else np.zeros_like(node.data)
            if node._backward is None or g is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg
        return {n: n.grad for n in self.nodes if n._backward is None and n.requires_grad}


def _toposort(output: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(output, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in reversed(node._parents):
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> dict:
    """Compute gradients of a scalar ``loss``; returns ``{leaf: grad}``.

    Gradients are recomputed from scratch on each call, so running it twice on
    the same graph gives identical results.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return {}
    return ComputeGraph(loss).backward()


def grads_for(loss: Tensor, params: Iterable[Tensor]) -> list[np.ndarray]:
    """Gradients of ``loss`` for each of ``params``; zeros where disconnected."""
    params = list(params)
    gm = backward(loss)
    return [gm.get(p, np.zeros_like(p.data)) for p in params]
