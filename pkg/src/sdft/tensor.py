"""Small dense tensors with reverse-mode automatic differentiation.

Every tensor wraps a float64 numpy array. Operations on tensors that require
gradients record themselves in the graph; :func:`backward` linearises that
graph into a :class:`Tape` and replays it in reverse.

Broadcasting is deliberately absent. The only exceptions are multiplication
by a python scalar (:func:`scale`) and the affine primitive :func:`linear`,
which owns its own row-broadcast bias rule.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.op = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def values(self) -> np.ndarray:
        return self.data.reshape(-1)

    def zero_grad(self) -> None:
        self.grad = None

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # operator sugar
    def __add__(self, other: Tensor) -> Tensor:
        return add(self, other)

    def __sub__(self, other: Tensor) -> Tensor:
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


def _result(data: np.ndarray, parents: Sequence[Tensor], op: str,
            backward: Callable[[np.ndarray], None]) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        out.op = op
    return out


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")

    def backward(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _result(a.data @ b.data, (a, b), "matmul", backward)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """``x @ w + b`` with ``b`` of shape ``(out,)`` added to every row."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"linear: cannot multiply {x.shape} by {w.shape}")
    if b.shape != (w.shape[1],):
        raise ShapeError(f"linear: bias shape {b.shape} does not match {w.shape}")

    def backward(g):
        if x.requires_grad:
            _accumulate(x, g @ w.data.T)
        if w.requires_grad:
            _accumulate(w, x.data.T @ g)
        if b.requires_grad:
            _accumulate(b, g.sum(axis=0))

    return _result(x.data @ w.data + b.data, (x, w, b), "linear", backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)

    def backward(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _result(a.data + b.data, (a, b), "add", backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("sub", a, b)

    def backward(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    return _result(a.data - b.data, (a, b), "sub", backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("mul", a, b)

    def backward(g):
        if a.requires_grad:
            _accumulate(a, g * b.data)
        if b.requires_grad:
            _accumulate(b, g * a.data)

    return _result(a.data * b.data, (a, b), "mul", backward)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def backward(g):
        _accumulate(a, g * c)

    return _result(a.data * c, (a,), "scale", backward)


def square(a: Tensor) -> Tensor:
    def backward(g):
        _accumulate(a, 2.0 * a.data * g)

    return _result(a.data * a.data, (a,), "square", backward)


def silu(a: Tensor) -> Tensor:
    """x * sigmoid(x); the only nonlinearity used by the models."""
    sig = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def backward(g):
        _accumulate(a, g * sig * (1.0 + a.data * (1.0 - sig)))

    return _result(a.data * sig, (a,), "silu", backward)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ShapeError(f"concat_cols: row mismatch {a.shape} vs {b.shape}")
    k = a.shape[1]

    def backward(g):
        _accumulate(a, g[:, :k])
        _accumulate(b, g[:, k:])

    return _result(np.concatenate([a.data, b.data], axis=1), (a, b), "concat", backward)


def total(a: Tensor) -> Tensor:
    def backward(g):
        _accumulate(a, np.full(a.shape, float(g)))

    return _result(np.asarray(a.data.sum()), (a,), "sum", backward)


def mean_squared(a: Tensor, b: Tensor, row_weights=None) -> Tensor:
    """Mean of squared differences over every element.

    With ``row_weights`` (a constant vector, one entry per row) each row's
    squared error is multiplied by its weight before the mean is taken.
    """
    _same_shape("mean_squared", a, b)
    diff = a.data - b.data
    n = diff.size
    if n == 0:
        raise ShapeError("mean_squared: empty operands")
    if row_weights is None:
        w = None
        sq = diff * diff
    else:
        w = np.asarray(row_weights, dtype=np.float64)
        if diff.ndim != 2 or w.shape != (diff.shape[0],):
            raise ShapeError(f"mean_squared: row weights {w.shape} do not fit {diff.shape}")
        sq = w[:, None] * diff * diff

    def backward(g):
        coef = (2.0 * float(g) / n) * diff
        if w is not None:
            coef = coef * w[:, None]
        _accumulate(a, coef)
        _accumulate(b, -coef)

    return _result(np.asarray(sq.sum() / n), (a, b), "mean_squared", backward)


_BINARY = {"add": add, "sub": sub, "mul": mul}
_UNARY = {"square": square, "silu": silu}


def elementwise(op: str, a: Tensor, b=None) -> Tensor:
    """Dispatch by name: add, sub, mul (binary), scale (b is a float), silu, square."""
    if op in _BINARY:
        if not isinstance(b, Tensor):
            raise TypeError(f"{op} needs a second tensor")
        return _BINARY[op](a, b)
    if op == "scale":
        return scale(a, b)
    if op in _UNARY:
        return _UNARY[op](a)
    raise ValueError(f"unknown elementwise op {op!r}")


class Tape:
    """Ordered record of the operations that produced a scalar."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def trace(cls, root: Tensor) -> Tape:
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
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        return cls([n for n in order if n._backward is not None])

    def __len__(self) -> int:
        return len(self.nodes)

    def replay(self, root: Tensor) -> None:
        root.grad = np.ones_like(root.data)
        for node in reversed(self.nodes):
            node._backward(node.grad)
        # interior results are discarded with the tape
        for node in self.nodes:
            if node is not root:
                node.grad = None


def backward(loss: Tensor) -> Tape:
    """Populate ``.grad`` on every leaf that requires gradients.

    Gradients accumulate into existing ``.grad`` arrays, so call
    :func:`zero_grad` between independent steps.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("loss does not depend on any tensor that requires gradients")
    tape = Tape.trace(loss)
    tape.replay(loss)
    return tape


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None
