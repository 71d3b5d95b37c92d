"""Fully connected backend layer."""

from __future__ import annotations

import numpy as np

from src.errors import ShapeMismatchError

from .base import GradBundle


def _check(Wm: np.ndarray, b: np.ndarray, x: np.ndarray) -> None:
    if Wm.ndim != 2 or b.shape != (Wm.shape[0],):
        raise ShapeMismatchError(f"weight {Wm.shape} and bias {b.shape} disagree")
    if x.shape[-1] != Wm.shape[1]:
        raise ShapeMismatchError(f"dense layer expects {Wm.shape[1]} inputs, got {x.shape[-1]}")


def dense_forward(Wm: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """z = Wm x + b for a vector (F,) or a batch (S, F)."""
    _check(Wm, b, x)
    return x @ Wm.T + b


def dense_backward(Wm: np.ndarray, x: np.ndarray, g: np.ndarray) -> GradBundle:
    """Gradients w.r.t. input, weight and bias; batch gradients are summed."""
    if g.shape[-1] != Wm.shape[0] or g.shape[:-1] != x.shape[:-1]:
        raise ShapeMismatchError(f"upstream gradient {g.shape} does not match output")
    x2 = np.atleast_2d(x)
    g2 = np.atleast_2d(g)
    return GradBundle(
        input_grad=g @ Wm,
        param_grads={"weight": g2.T @ x2, "bias": g2.sum(axis=0)},
    )
