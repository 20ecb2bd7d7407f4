"""Array-valued reverse-mode tape used for training.

``Tensor`` is the batched counterpart of the scalar ``DiffGraph``: each node
holds a float64 ndarray instead of one number, with the same primitive set
plus ``matmul``, reductions and indexing. Training a 200-wide network on a
200-point time grid is far out of reach for a scalar tape in Python; the
batched tape computes the identical derivatives elementwise.
"""

from __future__ import annotations

import numpy as np

from ..errors import NonFiniteValue


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check(data: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(data).all():
        raise NonFiniteValue(f"{op} produced a non-finite value")
    return data


class Tensor:
    """A node on the array tape.

    Leaves created with ``requires_grad=True`` receive ``.grad`` after
    ``backward``; so does every intermediate node, which the diagnostics use
    to read per-layer adjoints.
    """

    __array_ufunc__ = None  # make numpy defer to our reflected operators
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None, op="leaf"):
        self.data = _check(np.asarray(data, dtype=np.float64), op)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def T(self):
        return self.transpose()

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"Tensor({self.data!r}, op={self.op})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    # --- construction helpers -------------------------------------------------

    @staticmethod
    def lift(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    @staticmethod
    def _make(data, parents, backward, op):
        parents = tuple(p for p in parents if p.requires_grad)
        if not parents:
            return Tensor(data, op=op)
        return Tensor(data, True, parents, backward, op)

    # --- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = Tensor.lift(other)
        a, b = self, other

        def back(g):
            return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
        return Tensor._make(a.data + b.data, (a, b), _pair(a, b, back), "add")

    __radd__ = __add__

    def __sub__(self, other):
        other = Tensor.lift(other)
        a, b = self, other

        def back(g):
            return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
        return Tensor._make(a.data - b.data, (a, b), _pair(a, b, back), "sub")

    def __rsub__(self, other):
        return Tensor.lift(other) - self

    def __mul__(self, other):
        other = Tensor.lift(other)
        a, b = self, other

        def back(g):
            return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)
        return Tensor._make(a.data * b.data, (a, b), _pair(a, b, back), "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Tensor.lift(other)
        a, b = self, other
        with np.errstate(divide="ignore", invalid="ignore"):
            out = a.data / b.data

        def back(g):
            gb = g / b.data
            return _unbroadcast(gb, a.shape), _unbroadcast(-gb * out, b.shape)
        return Tensor._make(out, (a, b), _pair(a, b, back), "div")

    def __rtruediv__(self, other):
        return Tensor.lift(other) / self

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,), "neg")

    def __pow__(self, power):
        if power == 2:
            return self.square()
        raise NotImplementedError("only square is supported")

    def __matmul__(self, other):
        other = Tensor.lift(other)
        a, b = self, other

        def back(g):
            ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape) if a.requires_grad else None
            gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape) if b.requires_grad else None
            return _select(a, b, ga, gb)
        return Tensor._make(a.data @ b.data, (a, b), back, "matmul")

    def __rmatmul__(self, other):
        return Tensor.lift(other) @ self

    # --- elementwise functions ----------------------------------------------

    def sin(self):
        x = self.data
        return Tensor._make(np.sin(x), (self,), lambda g: (g * np.cos(x),), "sin")

    def cos(self):
        x = self.data
        return Tensor._make(np.cos(x), (self,), lambda g: (-g * np.sin(x),), "cos")

    def exp(self):
        with np.errstate(over="ignore"):
            out = np.exp(self.data)
        return Tensor._make(out, (self,), lambda g: (g * out,), "exp")

    def sqrt(self):
        with np.errstate(invalid="ignore"):
            out = np.sqrt(self.data)
        return Tensor._make(out, (self,), lambda g: (0.5 * g / out,), "sqrt")

    def square(self):
        x = self.data
        return Tensor._make(x * x, (self,), lambda g: (2.0 * g * x,), "square")

    def abs(self):
        x = self.data
        return Tensor._make(np.abs(x), (self,), lambda g: (g * np.sign(x),), "abs")

    def tanh(self):
        out = np.tanh(self.data)
        return Tensor._make(out, (self,), lambda g: (g * (1.0 - out * out),), "tanh")

    def relu(self):
        mask = self.data > 0.0
        return Tensor._make(self.data * mask, (self,), lambda g: (g * mask,), "relu")

    # --- shape and reductions -------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)
        return Tensor._make(self.data.sum(axis=axis, keepdims=keepdims), (self,), back, "sum")

    def mean(self, axis=None):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis) * (1.0 / n)

    def reshape(self, *shape):
        old = self.shape
        return Tensor._make(self.data.reshape(*shape), (self,), lambda g: (g.reshape(old),), "reshape")

    def transpose(self):
        """Swap the last two axes."""
        return Tensor._make(np.swapaxes(self.data, -1, -2), (self,),
                            lambda g: (np.swapaxes(g, -1, -2),), "transpose")

    def __getitem__(self, key):
        shape = self.shape

        def back(g):
            out = np.zeros(shape)
            np.add.at(out, key, g)
            return (out,)
        return Tensor._make(self.data[key], (self,), back, "getitem")

    # --- reverse sweep --------------------------------------------------------

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward needs a scalar root")
        order = _topological(self)
        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._backward(node.grad)):
                if g is None:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g


def _pair(a, b, back):
    """Adapt a two-input backward to the filtered parent tuple of ``_make``."""
    def inner(g):
        ga, gb = back(g)
        return _select(a, b, ga, gb)
    return inner


def _select(a, b, ga, gb):
    out = []
    if a.requires_grad:
        out.append(ga)
    if b.requires_grad:
        out.append(gb)
    return out


def _topological(root: Tensor) -> list[Tensor]:
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
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def stack(tensors, axis=0) -> Tensor:
    tensors = [Tensor.lift(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)

    def back(g):
        parts = np.moveaxis(g, axis, 0)
        return [parts[i] for i, t in enumerate(tensors) if t.requires_grad]
    return Tensor._make(data, tensors, back, "stack")


def concatenate(tensors, axis=0) -> Tensor:
    tensors = [Tensor.lift(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def back(g):
        pieces = np.split(g, bounds[1:-1], axis=axis)
        return [p for p, t in zip(pieces, tensors) if t.requires_grad]
    return Tensor._make(data, tensors, back, "concatenate")


def value_of(x) -> np.ndarray:
    """Plain float array behind a Tensor, a Var array, or an ordinary array."""
    if isinstance(x, Tensor):
        return x.data
    arr = np.asarray(x)
    if arr.dtype == object:
        return np.vectorize(float, otypes=[float])(arr)
    return arr.astype(np.float64, copy=False)
