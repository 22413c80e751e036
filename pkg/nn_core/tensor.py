"""
Tensor
Double-precision n-dimensional array with reverse-mode gradient tracking
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class ShapeError(ValueError):
    """Raised when tensor shapes are inconsistent with an operation"""


class GraphError(RuntimeError):
    """Raised when backward is requested on a tensor without a graph"""


class Tensor:
    """
    Numeric array carrying value, gradient and shape.

    Every operation producing a Tensor records its parents and a closure that
    propagates the upstream gradient into them. `backward` walks the graph in
    reverse topological order.
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "_prev", "_backward", "_op")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: str = "",
        _children: Tuple["Tensor", ...] = (),
        _op: str = "",
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._prev = _children
        self._backward: Callable[[], None] = lambda: None
        self._op = _op

    # ==================== Properties ====================

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, op={self._op or 'leaf'})"

    # ==================== Gradient plumbing ====================

    def accumulate(self, grad: np.ndarray) -> None:
        """Add an upstream contribution to this tensor's gradient"""
        if not self.requires_grad:
            return
        if grad.shape != self.data.shape:
            grad = unbroadcast(grad, self.data.shape)
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64, copy=True)
        else:
            self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """
        Run reverse-mode differentiation from this tensor.

        Args:
            grad: Seed gradient; defaults to ones (scalar losses).
        """
        if not self.requires_grad:
            raise GraphError("backward called on a tensor that does not require grad")

        if grad is None:
            if self.data.size != 1:
                raise GraphError("a seed gradient is required for non-scalar tensors")
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != self.data.shape:
            raise ShapeError(f"seed gradient shape {grad.shape} != tensor shape {self.shape}")

        order = _topological_order(self)
        # Interior nodes are re-seeded on every backward pass
        for node in order:
            if node._prev:
                node.grad = None
        self.grad = grad.copy()
        for node in reversed(order):
            if node.grad is not None:
                node._backward()

    # ==================== Arithmetic ====================

    def __add__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data + other.data, self.requires_grad or other.requires_grad,
                     _children=(self, other), _op="add")

        def _backward():
            self.accumulate(out.grad)
            other.accumulate(out.grad)
        out._backward = _backward
        return out

    __radd__ = __add__

    def __mul__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data * other.data, self.requires_grad or other.requires_grad,
                     _children=(self, other), _op="mul")

        def _backward():
            self.accumulate(out.grad * other.data)
            other.accumulate(out.grad * self.data)
        out._backward = _backward
        return out

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __pow__(self, exponent: float):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only scalar exponents are supported")
        out = Tensor(self.data ** exponent, self.requires_grad, _children=(self,), _op="pow")

        def _backward():
            self.accumulate(out.grad * exponent * self.data ** (exponent - 1))
        out._backward = _backward
        return out

    def __matmul__(self, other):
        other = as_tensor(other)
        if self.ndim != 2 or other.ndim != 2 or self.shape[1] != other.shape[0]:
            raise ShapeError(f"matmul shapes {self.shape} and {other.shape} are incompatible")
        out = Tensor(self.data @ other.data, self.requires_grad or other.requires_grad,
                     _children=(self, other), _op="matmul")

        def _backward():
            self.accumulate(out.grad @ other.data.T)
            other.accumulate(self.data.T @ out.grad)
        out._backward = _backward
        return out

    # ==================== Shape ops ====================

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape
        out = Tensor(self.data.reshape(shape), self.requires_grad, _children=(self,), _op="reshape")

        def _backward():
            self.accumulate(out.grad.reshape(original))
        out._backward = _backward
        return out

    @property
    def T(self) -> "Tensor":
        out = Tensor(self.data.T, self.requires_grad, _children=(self,), _op="transpose")

        def _backward():
            self.accumulate(out.grad.T)
        out._backward = _backward
        return out

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), self.requires_grad,
                     _children=(self,), _op="sum")

        def _backward():
            grad = out.grad
            if axis is not None and not keepdims:
                grad = np.expand_dims(grad, axis)
            self.accumulate(np.broadcast_to(grad, self.shape))
        out._backward = _backward
        return out

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        count = self.data.size if axis is None else np.prod([self.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(count))


# ==================== Helpers ====================

def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def unbroadcast(grad: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _topological_order(root: Tensor) -> List[Tensor]:
    """Iterative post-order walk; deep conv graphs overflow the recursive version"""
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
        for child in node._prev:
            if id(child) not in visited:
                stack.append((child, False))
    return order
