"""Minimal reverse-mode tensor engine.

A :class:`Tensor` wraps a float64 numpy array plus an optional gradient
buffer.  Differentiable operations record nodes onto the active
:class:`Tape` in execution order, which is by construction a topological
order of the computation graph.  ``backward(loss)`` replays the tape in
reverse, accumulating gradients additively; accumulation order is fixed by
tape order, so repeated runs with identical inputs produce bit-identical
gradients.

Every op output is checked for NaN/Inf and rejects non-finite values
immediately rather than letting them propagate.
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, Optional, Sequence

import numpy as np


class TensorError(Exception):
    """Base error for tensor-engine misuse."""


class ShapeError(TensorError):
    """Operand shapes are incompatible for the requested op."""


class NonFiniteError(TensorError):
    """An op produced (or was handed) NaN or Inf values."""


_tls = threading.local()


def _active_tape() -> Optional["Tape"]:
    return getattr(_tls, "tape", None)


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{op} produced non-finite values")


class Tensor:
    """Float64 n-dimensional array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.asarray(data, dtype=np.float64)
        _check_finite(arr, "tensor construction")
        self.data = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # Arithmetic sugar; all routed through the module-level ops.
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

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self) -> "Tensor":
        return transpose(self)

    @property
    def T(self) -> "Tensor":
        return transpose(self)


class _Node:
    __slots__ = ("out", "backward_fn")

    def __init__(self, out: Tensor, backward_fn: Callable[[np.ndarray], None]):
        self.out = out
        self.backward_fn = backward_fn


class Tape:
    """Execution-ordered record of differentiable op nodes.

    Use as a context manager around a forward pass; at most one tape may be
    active per thread.  Ops record a node only when some input requires a
    gradient, so inference outside a tape costs nothing extra.
    """

    def __init__(self):
        self._nodes: list[_Node] = []
        self._outputs: set[int] = set()

    def __len__(self) -> int:
        return len(self._nodes)

    def __enter__(self) -> "Tape":
        if _active_tape() is not None:
            raise TensorError("a tape is already active on this thread")
        _tls.tape = self
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _tls.tape = None

    def _record(self, out: Tensor, backward_fn: Callable[[np.ndarray], None]) -> None:
        self._nodes.append(_Node(out, backward_fn))
        self._outputs.add(id(out))

    def backward(self, loss: Tensor) -> None:
        """Populate gradients of ``loss`` w.r.t. every tensor that needs one."""
        if loss.data.size != 1:
            raise ShapeError(f"backward expects a scalar loss, got shape {loss.shape}")
        if id(loss) not in self._outputs:
            raise TensorError("loss tensor was not recorded on this tape")
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self._nodes):
            g = node.out.grad
            if g is None:
                continue
            node.backward_fn(g)


def backward(loss: Tensor) -> None:
    """Run reverse-mode accumulation on the active tape, seeded at ``loss``."""
    tape = _active_tape()
    if tape is None:
        raise TensorError("backward() requires an active tape")
    tape.backward(loss)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (the inverse of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _make_op(out_data: np.ndarray, parents: Sequence[Tensor],
             backward_fn: Callable[[np.ndarray], None], op: str) -> Tensor:
    _check_finite(out_data, op)
    requires = any(p.requires_grad for p in parents)
    out = Tensor(out_data, requires_grad=requires)
    tape = _active_tape()
    if requires and tape is not None:
        tape._record(out, backward_fn)
    return out


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _make_op(out_data, (a, b), bwd, "add")


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data - b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(-g, b.shape))

    return _make_op(out_data, (a, b), bwd, "sub")


def neg(a) -> Tensor:
    a = _as_tensor(a)

    def bwd(g):
        _accumulate(a, -g)

    return _make_op(-a.data, (a,), bwd, "neg")


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _make_op(out_data, (a, b), bwd, "mul")


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out_data = a.data / b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g / b.data, a.shape))
        _accumulate(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _make_op(out_data, (a, b), bwd, "div")


def sqrt(a) -> Tensor:
    a = _as_tensor(a)
    out_data = np.sqrt(a.data)

    def bwd(g):
        _accumulate(a, g * 0.5 / out_data)

    return _make_op(out_data, (a,), bwd, "sqrt")


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0.0

    def bwd(g):
        _accumulate(a, g * mask)

    return _make_op(np.where(mask, a.data, 0.0), (a,), bwd, "relu")


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape[1]} vs {b.shape[0]}")
    out_data = a.data @ b.data

    def bwd(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _make_op(out_data, (a, b), bwd, "matmul")


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"transpose expects a 2-D tensor, got shape {a.shape}")

    def bwd(g):
        _accumulate(a, g.T)

    return _make_op(a.data.T.copy(), (a,), bwd, "transpose")


def reshape(a, shape: tuple) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.reshape(shape)

    def bwd(g):
        _accumulate(a, g.reshape(a.shape))

    return _make_op(out_data, (a,), bwd, "reshape")


def tensor_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, a.shape).copy() if np.ndim(g) == 0
                        else np.full(a.shape, g.reshape(())))
            return
        gg = g
        if not keepdims:
            gg = np.expand_dims(gg, axis)
        _accumulate(a, np.broadcast_to(gg, a.shape).copy())

    return _make_op(np.asarray(out_data), (a,), bwd, "sum")


def gather_rows(a, indices) -> Tensor:
    """Select rows of a 2-D tensor; gradient scatter-adds back by row index."""
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"gather_rows expects a 2-D tensor, got shape {a.shape}")
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError("gather_rows expects a 1-D index array")
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ShapeError(f"gather_rows index out of range for {a.shape[0]} rows")
    out_data = a.data[idx]

    def bwd(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            np.add.at(a.grad, idx, g)

    return _make_op(out_data, (a,), bwd, "gather_rows")


def select_stack(candidates: Sequence[Tensor], selected) -> Tensor:
    """Per-sample gather across a list of same-shaped ``[B, ...]`` tensors.

    ``out[b] = candidates[selected[b]][b]``.  The selection index is treated
    as a constant; gradients route only into the chosen candidate rows.
    """
    if not candidates:
        raise ShapeError("select_stack needs at least one candidate")
    cands = [_as_tensor(c) for c in candidates]
    base = cands[0].shape
    for c in cands[1:]:
        if c.shape != base:
            raise ShapeError(f"select_stack candidates disagree on shape: {c.shape} vs {base}")
    sel = np.asarray(selected, dtype=np.int64)
    if sel.ndim != 1 or sel.shape[0] != base[0]:
        raise ShapeError("select_stack selection must be one index per sample")
    if sel.size and (sel.min() < 0 or sel.max() >= len(cands)):
        raise ShapeError(f"select_stack index out of range for {len(cands)} candidates")

    out_data = np.empty(base, dtype=np.float64)
    for r, c in enumerate(cands):
        rows = sel == r
        if rows.any():
            out_data[rows] = c.data[rows]

    def bwd(g):
        for r, c in enumerate(cands):
            if not c.requires_grad:
                continue
            rows = sel == r
            if not rows.any():
                continue
            if c.grad is None:
                c.grad = np.zeros_like(c.data)
            c.grad[rows] += g[rows]

    return _make_op(out_data, tuple(cands), bwd, "select_stack")


def parameter(data, name: Optional[str] = None) -> Tensor:
    """Trainable leaf tensor."""
    return Tensor(data, requires_grad=True, name=name)


def collect_gradless(params: Iterable[Tensor]) -> list[Tensor]:
    """Parameters that received no gradient in the last backward pass."""
    return [p for p in params if p.grad is None]
