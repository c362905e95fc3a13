"""
Small reverse-mode autodiff tape over dense float64 matrices.

A ``Tensor`` wraps an ndarray, remembers the tensors it was computed from
and a closure that pushes its gradient back into them. ``backward()`` on a
scalar walks the recorded graph in reverse topological order.

Only the primitives the GroupFS losses need are implemented:

    add / sub / mul / div / neg       (numpy broadcasting)
    matmul, transpose, reshape
    sum, mean, exp, clamp, softmax
    normal_cdf                        (Gaussian CDF, used for P(z > 0))
    pairwise_sq_dists                 (squared Euclidean distance matrix)
    center_normalize_columns          (zero-mean, unit-norm columns)
"""

from __future__ import annotations
import math
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import ndtr

from config.settings import ZERO_NORM_TOL

ArrayLike = Union["Tensor", np.ndarray, float, int]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _normal_pdf(x: np.ndarray) -> np.ndarray:
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    # keep ndarray <op> Tensor dispatching to the Tensor operators
    __array_ufunc__ = None

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        _parents: Sequence["Tensor"] = (),
        _op: str = "",
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: Tuple[Tensor, ...] = tuple(_parents)
        self._backward: Callable[[], None] = lambda: None
        self._op = _op

    # -----------------------------------------------------------------
    # Basics
    # -----------------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def item(self) -> float:
        return float(self.data)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self._op or 'leaf'}{flag})"

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        grad = _unbroadcast(np.asarray(grad, dtype=np.float64), self.shape)
        self.grad = grad.copy() if self.grad is None else self.grad + grad

    # -----------------------------------------------------------------
    # Operators
    # -----------------------------------------------------------------

    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return div(other, self)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return matmul(self, other)

    def __rmatmul__(self, other: ArrayLike) -> "Tensor":
        return matmul(other, self)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return reshape(self, shape)

    # -----------------------------------------------------------------
    # Reverse sweep
    # -----------------------------------------------------------------

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Propagate d(self)/d(leaf) into ``.grad`` of every reachable leaf."""
        if not self.requires_grad:
            return
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed needs a scalar tensor")
            grad = np.ones_like(self.data)

        order = _topological_order(self)
        for node in order:
            if node._parents:
                node.grad = None
        self.grad = np.asarray(grad, dtype=np.float64)
        for node in reversed(order):
            if node.grad is not None:
                node._backward()


def _topological_order(root: Tensor) -> List[Tensor]:
    """Iterative DFS post-order over the nodes that require gradients."""
    order: List[Tensor] = []
    visited = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data: np.ndarray, parents: Sequence[Tensor], op: str) -> Tensor:
    requires = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=requires, _parents=parents if requires else (), _op=op)


# ---------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _result(a.data + b.data, (a, b), "add")

    def _backward():
        a._accumulate(out.grad)
        b._accumulate(out.grad)
    out._backward = _backward
    return out


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _result(a.data - b.data, (a, b), "sub")

    def _backward():
        a._accumulate(out.grad)
        b._accumulate(-out.grad)
    out._backward = _backward
    return out


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _result(a.data * b.data, (a, b), "mul")

    def _backward():
        a._accumulate(out.grad * b.data)
        b._accumulate(out.grad * a.data)
    out._backward = _backward
    return out


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _result(a.data / b.data, (a, b), "div")

    def _backward():
        a._accumulate(out.grad / b.data)
        b._accumulate(-out.grad * a.data / (b.data * b.data))
    out._backward = _backward
    return out


def neg(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = _result(-a.data, (a,), "neg")

    def _backward():
        a._accumulate(-out.grad)
    out._backward = _backward
    return out


def exp(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = _result(np.exp(a.data), (a,), "exp")

    def _backward():
        a._accumulate(out.grad * out.data)
    out._backward = _backward
    return out


def clamp(a: ArrayLike, lo: Optional[float] = None, hi: Optional[float] = None) -> Tensor:
    """Clip into [lo, hi]; the gradient is zero at and beyond either bound."""
    a = as_tensor(a)
    lo_v = -np.inf if lo is None else lo
    hi_v = np.inf if hi is None else hi
    out = _result(np.clip(a.data, lo_v, hi_v), (a,), "clamp")

    def _backward():
        inside = (a.data > lo_v) & (a.data < hi_v)
        a._accumulate(out.grad * inside)
    out._backward = _backward
    return out


def normal_cdf(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = _result(ndtr(a.data), (a,), "normal_cdf")

    def _backward():
        a._accumulate(out.grad * _normal_pdf(a.data))
    out._backward = _backward
    return out


# ---------------------------------------------------------------------
# Shape and reductions
# ---------------------------------------------------------------------

def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    out = _result(a.data @ b.data, (a, b), "matmul")

    def _backward():
        a._accumulate(out.grad @ b.data.T)
        b._accumulate(a.data.T @ out.grad)
    out._backward = _backward
    return out


def transpose(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = _result(a.data.T, (a,), "transpose")

    def _backward():
        a._accumulate(out.grad.T)
    out._backward = _backward
    return out


def reshape(a: ArrayLike, shape: Tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    out = _result(a.data.reshape(shape), (a,), "reshape")

    def _backward():
        a._accumulate(out.grad.reshape(a.shape))
    out._backward = _backward
    return out


def tsum(a: ArrayLike, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = _result(a.data.sum(axis=axis, keepdims=keepdims), (a,), "sum")

    def _backward():
        g = out.grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.shape))
    out._backward = _backward
    return out


def mean(a: ArrayLike, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else a.shape[axis]
    return tsum(a, axis=axis, keepdims=keepdims) / float(count)


def softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = _result(e / e.sum(axis=axis, keepdims=True), (a,), "softmax")

    def _backward():
        s = out.data
        g = out.grad
        a._accumulate(s * (g - (g * s).sum(axis=axis, keepdims=True)))
    out._backward = _backward
    return out


# ---------------------------------------------------------------------
# Fused graph primitives
# ---------------------------------------------------------------------

def pairwise_sq_dists(x: ArrayLike) -> Tensor:
    """S_ij = ||x_i - x_j||^2 over the rows of an n x m matrix."""
    x = as_tensor(x)
    if x.ndim != 2:
        raise ValueError(f"pairwise_sq_dists expects a 2-D matrix, got {x.shape}")
    out = _result(cdist(x.data, x.data, metric="sqeuclidean"), (x,), "pairwise_sq_dists")

    def _backward():
        gs = out.grad + out.grad.T
        x._accumulate(2.0 * (gs.sum(axis=1, keepdims=True) * x.data - gs @ x.data))
    out._backward = _backward
    return out


def center_normalize_columns(f: ArrayLike) -> Tensor:
    """Center each column to zero mean and scale it to unit l2-norm.

    Columns whose centered norm is below ZERO_NORM_TOL come out as zero.
    """
    f = as_tensor(f)
    centered = f.data - f.data.mean(axis=0, keepdims=True)
    norms = np.sqrt((centered * centered).sum(axis=0, keepdims=True))
    live = norms > ZERO_NORM_TOL
    safe = np.where(live, norms, 1.0)
    normed = np.where(live, centered / safe, 0.0)
    out = _result(normed, (f,), "center_normalize_columns")

    def _backward():
        g = out.grad
        u = out.data
        grad_c = np.where(live, (g - u * (u * g).sum(axis=0, keepdims=True)) / safe, 0.0)
        f._accumulate(grad_c - grad_c.mean(axis=0, keepdims=True))
    out._backward = _backward
    return out
