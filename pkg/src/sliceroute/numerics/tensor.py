"""Dense float64 tensors with reverse-mode differentiation.

Every tensor wraps a row-major numpy buffer plus a lazily materialized
gradient buffer of the same shape.  Operations record their operands and a
gradient-propagation rule on the output tensor; `backward` replays the rules
of the computation record in reverse execution order.  All math is 64-bit:
the toolkit trades speed for gradient-check fidelity.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from ..errors import DimensionError, DomainError, GraphError, ParameterError

BCE_EPSILON = 1e-7

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable operation recording inside the block (pure forward compute)."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    """A dense float64 array participating in a differentiable computation.

    `values` is immutable by convention once the tensor has been consumed by
    an operation; only optimizers mutate leaf values in place, between
    backward passes.  `grad` accumulates across backward calls until
    `zero_grad` resets it.
    """

    __slots__ = ("values", "requires_grad", "_grad", "_parents", "_rule")

    def __init__(self, values, requires_grad: bool = False):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self._grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._rule: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            self._grad = np.zeros_like(self.values)
        return self._grad

    def zero_grad(self) -> None:
        self._grad = None

    def is_leaf(self) -> bool:
        return self._rule is None

    def item(self) -> float:
        if self.values.size != 1:
            raise GraphError(f"item() requires a single-element tensor, got shape {self.shape}")
        return float(self.values.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.values)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; scalars are lifted to constant tensors.
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def parameter(values, rng: np.random.Generator | None = None, scale_: float | None = None) -> Tensor:
    """Create a trainable leaf tensor, optionally random-initialized."""
    if rng is not None:
        values = rng.standard_normal(values) * (scale_ if scale_ is not None else 1.0)
    return Tensor(values, requires_grad=True)


def constant(values) -> Tensor:
    return Tensor(values)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _result(values: np.ndarray, parents: tuple[Tensor, ...], rule) -> Tensor:
    out = Tensor(values)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._rule = rule
    return out


class ComputationRecord:
    """Ordered list of executed operations reachable from one output.

    Nodes appear in a valid execution order (operands before consumers), so
    replaying gradient rules in reverse order visits every operand exactly
    once per operation.
    """

    __slots__ = ("nodes",)

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def trace(cls, root: Tensor) -> "ComputationRecord":
        nodes: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                nodes.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        return cls(nodes)


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(tensor) into the grad buffer of every reachable
    requires_grad tensor.  Repeated calls without zero_grad accumulate."""
    if loss.values.size != 1:
        raise GraphError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    record = ComputationRecord.trace(loss)
    adjoints: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
    for node in reversed(record.nodes):
        adj = adjoints.pop(id(node), None)
        if adj is None:
            continue
        if not adj.any():
            # A zero adjoint contributes nothing anywhere below; skipping the
            # subtree keeps untouched parameter gradients bitwise +0.0 (a BLAS
            # product 0.0*x may round to -0.0) and avoids dead work.
            continue
        if node._grad is None:
            # Leaves keep their buffer private; adjoints of interior nodes are
            # pass-local, so aliasing them into grad is safe.
            node._grad = adj.copy() if node._rule is None else adj
        else:
            node._grad = node._grad + adj
        if node._rule is None:
            continue
        for p, contrib in zip(node._parents, node._rule(adj)):
            if contrib is None or not p.requires_grad:
                continue
            key = id(p)
            held = adjoints.get(key)
            adjoints[key] = contrib if held is None else held + contrib


# ---------------------------------------------------------------------------
# primitive operations
# ---------------------------------------------------------------------------


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} are incompatible") from None


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} do not chain")
    av, bv = a.values, b.values

    def rule(g):
        ga = g @ bv.T if a.requires_grad else None
        gb = av.T @ g if b.requires_grad else None
        return ga, gb

    return _result(av @ bv, (a, b), rule)


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "add")

    def rule(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.values + b.values, (a, b), rule)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "sub")

    def rule(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result(a.values - b.values, (a, b), rule)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "mul")
    av, bv = a.values, b.values

    def rule(g):
        ga = _unbroadcast(g * bv, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * av, b.shape) if b.requires_grad else None
        return ga, gb

    return _result(av * bv, (a, b), rule)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def rule(g):
        return (g * c,)

    return _result(a.values * c, (a,), rule)


def abs_(a: Tensor) -> Tensor:
    av = a.values

    def rule(g):
        # subgradient convention sign(0) = 0, which np.sign provides
        return (g * np.sign(av),)

    return _result(np.abs(av), (a,), rule)


def sigmoid(a: Tensor) -> Tensor:
    out = expit(a.values)

    def rule(g):
        return (g * out * (1.0 - out),)

    return _result(out, (a,), rule)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.values)

    def rule(g):
        return (g * (1.0 - out * out),)

    return _result(out, (a,), rule)


def softmax_temp(a: Tensor, tau: float) -> Tensor:
    """Temperature softmax along the last axis.

    Inputs are shifted by their per-row maximum before the exponential so the
    computation stays finite for any temperature (tau=0.1 would otherwise
    overflow on moderate inputs).
    """
    if not tau > 0:
        raise ParameterError(f"softmax temperature must be positive, got {tau}")
    v = a.values
    shifted = (v - v.max(axis=-1, keepdims=True)) / tau
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def rule(g):
        inner = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - inner) / tau,)

    return _result(out, (a,), rule)


def bce_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean binary cross entropy with predictions clamped to [eps, 1-eps]."""
    if pred.shape != target.shape:
        raise DimensionError(f"bce_loss: shapes {pred.shape} and {target.shape} differ")
    tv = target.values
    if tv.size and (tv.min() < 0.0 or tv.max() > 1.0):
        raise DomainError("bce_loss: target values must lie in [0, 1]")
    eps = BCE_EPSILON
    p = np.clip(pred.values, eps, 1.0 - eps)
    n = p.size
    value = -(tv * np.log(p) + (1.0 - tv) * np.log(1.0 - p)).sum() / n
    inside = (pred.values > eps) & (pred.values < 1.0 - eps)

    def rule(g):
        gp = None
        if pred.requires_grad:
            gp = g * inside * (p - tv) / (p * (1.0 - p)) / n
        gt = None
        if target.requires_grad:
            gt = g * (np.log(1.0 - p) - np.log(p)) / n
        return gp, gt

    return _result(np.asarray(value), (pred, target), rule)


def sum_all(a: Tensor) -> Tensor:
    def rule(g):
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result(np.asarray(a.values.sum()), (a,), rule)


def mean_all(a: Tensor) -> Tensor:
    n = a.values.size

    def rule(g):
        return (np.broadcast_to(g / n, a.shape).copy(),)

    return _result(np.asarray(a.values.mean()), (a,), rule)


def sum_axis(a: Tensor, axis: int) -> Tensor:
    def rule(g):
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _result(a.values.sum(axis=axis), (a,), rule)


def mean_axis(a: Tensor, axis: int) -> Tensor:
    n = a.shape[axis]

    def rule(g):
        return (np.broadcast_to(np.expand_dims(g / n, axis), a.shape).copy(),)

    return _result(a.values.mean(axis=axis), (a,), rule)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    orig = a.shape

    def rule(g):
        return (g.reshape(orig),)

    return _result(a.values.reshape(shape), (a,), rule)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    if not tensors:
        raise DimensionError("concat: need at least one tensor")
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def rule(g):
        pieces = np.split(g, offsets, axis=axis)
        return [p if t.requires_grad else None for t, p in zip(tensors, pieces)]

    return _result(np.concatenate([t.values for t in tensors], axis=axis), tensors, rule)


def gather_rows(a: Tensor, index) -> Tensor:
    """Select rows (axis 0) by integer index; duplicate indices accumulate
    gradient contributions."""
    idx = np.asarray(index, dtype=np.intp)

    def rule(g):
        out = np.zeros_like(a.values)
        np.add.at(out, idx, g)
        return (out,)

    return _result(a.values[idx], (a,), rule)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    def rule(g):
        out = np.zeros_like(a.values)
        out[..., start:stop] = g
        return (out,)

    return _result(np.ascontiguousarray(a.values[..., start:stop]), (a,), rule)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine map `x @ w + b` with b broadcast over rows."""
    out = matmul(x, w)
    return out if b is None else add(out, b)
