"""Elementwise activations."""

from __future__ import annotations

import numpy as np

from src.tensor import wrap

from .base import PointwiseKind, as_array


def pointwise(kind: PointwiseKind, x):
    """Apply relu, square or identity to a tensor or array."""
    values = as_array(x)
    if kind is PointwiseKind.RELU:
        out = np.maximum(values, 0.0)
    elif kind is PointwiseKind.SQUARE:
        out = values * values
    else:
        out = values
    return out if isinstance(x, np.ndarray) else wrap(out)


def pointwise_grad(kind: PointwiseKind, x, g):
    """Upstream gradient times the activation derivative at x (relu'(0) = 0)."""
    values, upstream = as_array(x), as_array(g)
    if kind is PointwiseKind.RELU:
        out = upstream * (values > 0)
    elif kind is PointwiseKind.SQUARE:
        out = upstream * 2.0 * values
    else:
        out = upstream
    return out if isinstance(g, np.ndarray) else wrap(out)
