"""
Dense n-dimensional array with reverse-mode automatic differentiation
"""

import contextlib
import threading
from typing import Callable, Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from errors import DimensionError, NonFiniteError

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]

_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """
    Disable graph construction inside the block (sampling, evaluation).
    """
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def _check_finite(values: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"non-finite values produced by {where}")


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """
    Sum a broadcast gradient back down to the operand's shape.
    """
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """
    A float64 array plus the bookkeeping needed to backpropagate through it.

    Tensors are treated as immutable once they take part in a graph; only
    ``grad`` is written during ``backward`` and by optimizers.
    """

    __array_ufunc__ = None

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        _parents: Tuple["Tensor", ...] = (),
        _op: str = "",
    ):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self._op = _op

    # ------------------------------------------------------------------
    # Properties
    # ------------------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        grad = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{grad})"

    def __len__(self) -> int:
        return self.shape[0]

    # ------------------------------------------------------------------
    # Graph plumbing
    # ------------------------------------------------------------------

    @staticmethod
    def make(
        data: np.ndarray,
        parents: Tuple["Tensor", ...],
        op: str,
        backward: Callable[[np.ndarray], None],
    ) -> "Tensor":
        """
        Wrap an op result, attaching ``backward`` when any parent needs grad.
        """
        _check_finite(data, op)
        needs_grad = is_grad_enabled() and any(p.requires_grad for p in parents)
        out = Tensor(data, requires_grad=needs_grad)
        if needs_grad:
            out._parents = parents
            out._op = op
            out._backward = backward
        return out

    def accumulate(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if grad.shape != self.shape:
            grad = unbroadcast(grad, self.shape)
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64)
        else:
            self.grad = self.grad + grad

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """
        Backpropagate from this tensor through the recorded graph.

        Args:
            grad: Seed gradient; defaults to ones for a scalar output.

        Raises:
            DimensionError: If no seed is given for a non-scalar tensor
            NonFiniteError: If any accumulated gradient is NaN/Inf
        """
        if grad is None:
            if self.size != 1:
                raise DimensionError("backward() without a seed needs a scalar", self.shape)
            grad = np.ones_like(self.data)

        order = []
        visited = set()
        stack = [(self, False)]
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

        self.accumulate(np.asarray(grad, dtype=np.float64))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

        for node in order:
            if node.grad is not None and not node._parents:
                _check_finite(node.grad, "backward pass")

    # ------------------------------------------------------------------
    # Elementwise arithmetic
    # ------------------------------------------------------------------

    def __add__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)

        def backward(g: np.ndarray) -> None:
            self.accumulate(g)
            other.accumulate(g)

        return Tensor.make(self.data + other.data, (self, other), "add", backward)

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        return Tensor.make(-self.data, (self,), "neg", lambda g: self.accumulate(-g))

    def __sub__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)

        def backward(g: np.ndarray) -> None:
            self.accumulate(g)
            other.accumulate(-g)

        return Tensor.make(self.data - other.data, (self, other), "sub", backward)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return as_tensor(other) - self

    def __mul__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)

        def backward(g: np.ndarray) -> None:
            self.accumulate(g * other.data)
            other.accumulate(g * self.data)

        return Tensor.make(self.data * other.data, (self, other), "mul", backward)

    __rmul__ = __mul__

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)

        def backward(g: np.ndarray) -> None:
            self.accumulate(g / other.data)
            other.accumulate(-g * self.data / (other.data ** 2))

        return Tensor.make(self.data / other.data, (self, other), "div", backward)

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return as_tensor(other) / self

    def __pow__(self, exponent: float) -> "Tensor":
        if not isinstance(exponent, (int, float)):
            raise TypeError("only scalar exponents are supported")

        def backward(g: np.ndarray) -> None:
            self.accumulate(g * exponent * self.data ** (exponent - 1))

        return Tensor.make(self.data ** exponent, (self,), "pow", backward)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)
        if self.ndim != 2 or other.ndim != 2 or self.shape[1] != other.shape[0]:
            raise DimensionError("matmul operands do not align", self.shape, other.shape)

        def backward(g: np.ndarray) -> None:
            self.accumulate(g @ other.data.T)
            other.accumulate(self.data.T @ g)

        return Tensor.make(self.data @ other.data, (self, other), "matmul", backward)

    def exp(self) -> "Tensor":
        value = np.exp(self.data)
        return Tensor.make(value, (self,), "exp", lambda g: self.accumulate(g * value))

    def log(self) -> "Tensor":
        return Tensor.make(np.log(self.data), (self,), "log", lambda g: self.accumulate(g / self.data))

    # ------------------------------------------------------------------
    # Reductions and shape
    # ------------------------------------------------------------------

    def sum(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        def backward(g: np.ndarray) -> None:
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self.accumulate(np.broadcast_to(g, self.shape))

        return Tensor.make(self.data.sum(axis=axis, keepdims=keepdims), (self,), "sum", backward)

    def mean(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        count = self.size if axis is None else int(np.prod([self.shape[a] for a in np.atleast_1d(axis)]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        try:
            value = self.data.reshape(shape)
        except ValueError as e:
            raise DimensionError(f"cannot reshape to {shape}: {e}", self.shape) from e
        return Tensor.make(value, (self,), "reshape", lambda g: self.accumulate(g.reshape(self.shape)))

    def flatten(self, start_dim: int = 1) -> "Tensor":
        return self.reshape(*self.shape[:start_dim], -1)

    def transpose(self, *axes: int) -> "Tensor":
        axes = axes or tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))
        return Tensor.make(
            self.data.transpose(axes),
            (self,),
            "transpose",
            lambda g: self.accumulate(g.transpose(inverse)),
        )

    @property
    def T(self) -> "Tensor":
        return self.transpose()


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(data: np.ndarray) -> Tensor:
    """
    Leaf tensor that collects gradients.
    """
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)
