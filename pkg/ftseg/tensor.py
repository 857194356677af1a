"""Dense float64 tensors with a reverse-mode tape."""

from __future__ import annotations

import logging
import threading
from collections.abc import Callable, Iterable, Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .exceptions import ShapeError, ValidationError

logger = logging.getLogger(__name__)

ArrayLike = np.ndarray | float | int | Sequence[float] | Sequence[Sequence[float]]
BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class Node:
    """One recorded operation: its inputs, output and adjoint rule."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


_local = threading.local()


def _tape_stack() -> list[Tape | None]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape() -> Tape | None:
    """Tape that currently records operations in this thread, if any."""
    stack = _tape_stack()
    return stack[-1] if stack else None


@contextmanager
def no_grad() -> Iterator[None]:
    """Suspend recording inside the block."""
    stack = _tape_stack()
    stack.append(None)
    try:
        yield
    finally:
        stack.pop()


@contextmanager
def branch_trace() -> Iterator[list[np.ndarray]]:
    """Collect the branch taken by every piecewise op evaluated in the block.

    relu, clip and maxpool2d append their selection (active mask, side of the
    bounds, window argmax) in evaluation order. Two evaluations of one
    function with equal traces lie on the same linear piece of each op.
    """
    trace: list[np.ndarray] = []
    previous = getattr(_local, "branches", None)
    _local.branches = trace
    try:
        yield trace
    finally:
        _local.branches = previous


def note_branch(selection: np.ndarray) -> None:
    trace = getattr(_local, "branches", None)
    if trace is not None:
        trace.append(selection)


def same_branches(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


class Tape:
    """Append-only operation log; topological order equals append order.

    Tapes are thread-local while active, so independent training jobs running
    on worker threads never share one.
    """

    def __init__(self) -> None:
        self.nodes: list[Node] = []

    def __enter__(self) -> Tape:
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        _tape_stack().pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def record(
        self,
        op: str,
        inputs: tuple[Tensor, ...],
        output: Tensor,
        backward: BackwardFn,
    ) -> None:
        output.node_id = len(self.nodes)
        output.tape = self
        self.nodes.append(Node(op, inputs, output, backward))

    def clear(self) -> None:
        for node in self.nodes:
            node.output.node_id = None
            node.output.tape = None
        self.nodes.clear()

    def backward(self, loss: Tensor, params: Iterable[Tensor] | None = None) -> None:
        """Accumulate d(loss)/d(leaf) into `.grad` of every reachable leaf.

        Leaves listed in `params` receive a zero gradient even when the loss
        does not depend on them.
        """
        if loss.size != 1:
            raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
        if loss.tape is not self:
            raise ValidationError("loss is not connected to this tape")

        for param in params or ():
            if param.grad is None:
                param.grad = np.zeros_like(param.data)

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            grad = grads.pop(id(node.output), None)
            if grad is None:
                continue
            for tensor, contribution in zip(node.inputs, node.backward(grad)):
                if contribution is None or not tensor.requires_grad:
                    continue
                if tensor.tape is self:
                    key = id(tensor)
                    grads[key] = grads[key] + contribution if key in grads else contribution
                elif tensor.grad is None:
                    tensor.grad = np.array(contribution, dtype=np.float64)
                else:
                    tensor.grad = tensor.grad + contribution


class Tensor:
    """Row-major float64 array with a gradient slot and tape linkage."""

    __array_priority__ = 100

    def __init__(self, data: ArrayLike, requires_grad: bool = False):
        self.data: np.ndarray = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.node_id: int | None = None
        self.tape: Tape | None = None

    @classmethod
    def parameter(cls, data: ArrayLike) -> Tensor:
        """Leaf tensor updated by the optimizer."""
        return cls(np.array(data, dtype=np.float64), requires_grad=True)

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
        if self.size != 1:
            raise ShapeError(f"item() requires a single value, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, params: Iterable[Tensor] | None = None) -> None:
        if self.tape is None:
            raise ValidationError("tensor is not connected to a tape")
        self.tape.backward(self, params)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other: Tensor | float) -> Tensor:
        return add(self, other)

    def __radd__(self, other: float) -> Tensor:
        return add(other, self)

    def __sub__(self, other: Tensor | float) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other: float) -> Tensor:
        return sub(other, self)

    def __mul__(self, other: Tensor | float) -> Tensor:
        return mul(self, other)

    def __rmul__(self, other: float) -> Tensor:
        return mul(other, self)

    def __truediv__(self, other: Tensor | float) -> Tensor:
        return div(self, other)

    def __rtruediv__(self, other: float) -> Tensor:
        return div(other, self)

    def __neg__(self) -> Tensor:
        return neg(self)


def as_tensor(value: Tensor | ArrayLike) -> Tensor:
    """Wrap constants; tensors pass through."""
    return value if isinstance(value, Tensor) else Tensor(value)


def record(
    op: str,
    data: np.ndarray,
    inputs: tuple[Tensor, ...],
    backward: BackwardFn,
) -> Tensor:
    """Build an op result and put it on the active tape when gradients flow."""
    out = Tensor(data)
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(op, inputs, out, backward)
    return out


def broadcast_shape(a: tuple[int, ...], b: tuple[int, ...], op: str) -> tuple[int, ...]:
    """Result shape of a binary op.

    Admitted: identical shapes, a single-value operand, or a same-rank operand
    whose dimensions are 1 wherever they differ from the other (bias and
    channel-broadcast coefficients).
    """
    if a == b:
        return a
    if int(np.prod(a)) == 1 and len(a) <= len(b):
        return b
    if int(np.prod(b)) == 1 and len(b) <= len(a):
        return a
    if len(a) == len(b):
        if all(x == y or y == 1 for x, y in zip(a, b)):
            return a
        if all(x == y or x == 1 for x, y in zip(a, b)):
            return b
    raise ShapeError(f"{op}: shapes {a} and {b} are not broadcast-compatible")


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient back down to an operand's shape."""
    if grad.shape == shape:
        return grad
    if int(np.prod(shape)) == 1:
        return np.full(shape, grad.sum())
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    return grad.sum(axis=axes, keepdims=True)


def add(a: Tensor | float, b: Tensor | float) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    broadcast_shape(a.shape, b.shape, "add")

    def backward(g: np.ndarray):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return record("add", a.data + b.data, (a, b), backward)


def sub(a: Tensor | float, b: Tensor | float) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    broadcast_shape(a.shape, b.shape, "sub")

    def backward(g: np.ndarray):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return record("sub", a.data - b.data, (a, b), backward)


def mul(a: Tensor | float, b: Tensor | float) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    broadcast_shape(a.shape, b.shape, "mul")

    def backward(g: np.ndarray):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return record("mul", a.data * b.data, (a, b), backward)


def div(a: Tensor | float, b: Tensor | float) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    broadcast_shape(a.shape, b.shape, "div")
    out = a.data / b.data

    def backward(g: np.ndarray):
        return (
            unbroadcast(g / b.data, a.shape),
            unbroadcast(-g * out / b.data, b.shape),
        )

    return record("div", out, (a, b), backward)


def neg(x: Tensor) -> Tensor:
    return record("neg", -x.data, (x,), lambda g: (-g,))


def relu(x: Tensor) -> Tensor:
    # gradient at exactly 0 is 0
    mask = x.data > 0
    note_branch(mask)
    return record("relu", np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    z = x.data
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return record("sigmoid", out, (x,), lambda g: (g * out * (1.0 - out),))


def pow_scalar(x: Tensor, exponent: float) -> Tensor:
    """Elementwise x**exponent for a non-negative base."""
    if np.any(x.data < 0):
        raise ValidationError("pow_scalar requires a non-negative base")
    if exponent == 1.0:
        return record("pow_scalar", x.data.copy(), (x,), lambda g: (g,))

    base = x.data
    out = np.power(base, exponent)

    def backward(g: np.ndarray):
        # the derivative at a zero base is taken as 0 for exponents below 1
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = exponent * np.power(base, exponent - 1.0)
        slope = np.where(base > 0, slope, 0.0)
        return (g * slope,)

    return record("pow_scalar", out, (x,), backward)


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    inside = (x.data >= lo) & (x.data <= hi)
    note_branch(np.sign(x.data - lo) + np.sign(x.data - hi))
    return record("clip", np.clip(x.data, lo, hi), (x,), lambda g: (g * inside,))


def sum_all(x: Tensor) -> Tensor:
    """Sum of all elements as a 0-d tensor."""
    shape = x.shape
    return record(
        "sum", np.asarray(x.data.sum()), (x,), lambda g: (np.full(shape, float(g)),)
    )


def mean_all(x: Tensor) -> Tensor:
    shape, n = x.shape, max(x.size, 1)
    return record(
        "mean",
        np.asarray(x.data.sum() / n),
        (x,),
        lambda g: (np.full(shape, float(g) / n),),
    )
