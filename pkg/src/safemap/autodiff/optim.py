"""Plain SGD with a step-decay learning-rate schedule."""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

from .tensor import Tensor, TensorError


class MissingGradientError(TensorError):
    """A parameter slated for update never received a gradient."""


def sgd_step(params: Sequence[Tensor], lr: float,
             allow_gradless: Optional[Iterable[Tensor]] = None) -> int:
    """In-place update p <- p - lr * grad, then clear all gradients.

    Raises :class:`MissingGradientError` if a parameter has no gradient,
    unless it was explicitly listed in ``allow_gradless`` (for parameters a
    non-differentiable selection legitimately starves).  Returns the number
    of parameters updated.
    """
    if lr <= 0.0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    allowed = {id(p) for p in allow_gradless} if allow_gradless is not None else set()
    updated = 0
    for p in params:
        if p.grad is None:
            if id(p) in allowed:
                continue
            raise MissingGradientError(
                f"parameter {p.name!r} has no gradient; run backward() first")
        p.data -= lr * p.grad
        updated += 1
    for p in params:
        p.grad = None
    return updated


def step_decay_lr(lr0: float, epoch: int, factor: float = 0.5, every: int = 10) -> float:
    """lr(e) = lr0 * factor^floor(e / every), epochs counted from zero."""
    if epoch < 0:
        raise ValueError(f"epoch must be non-negative, got {epoch}")
    return lr0 * factor ** (epoch // every)
