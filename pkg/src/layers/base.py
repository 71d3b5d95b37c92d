"""Shared layer types."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict

import numpy as np


class Domain(Enum):
    """Where a feature map lives."""

    SPATIAL = "spatial"
    SPECTRAL = "spectral"


class ConvMode(Enum):
    """Boundary handling of the direct spatial convolution."""

    CIRCULAR = "circular"
    ZERO_PAD = "zero_pad"


class PointwiseKind(Enum):
    """Elementwise activations."""

    RELU = "relu"
    SQUARE = "square"
    IDENTITY = "identity"


@dataclass
class GradBundle:
    """Gradients of the loss w.r.t. a layer's input and parameters."""

    input_grad: Any
    param_grads: Dict[str, Any] = field(default_factory=dict)


def as_array(value: Any) -> np.ndarray:
    """Raw array behind a tensor or array."""
    return getattr(value, "data", value)
