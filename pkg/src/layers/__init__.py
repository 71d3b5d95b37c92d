"""Layers module - forward and backward passes for every layer kind."""

from .base import ConvMode, Domain, GradBundle, PointwiseKind
from .dense import dense_backward, dense_forward
from .pointwise import pointwise, pointwise_grad
from .spatial import (
    MaxPoolIndices,
    max_pool_backward,
    max_pool_forward,
    spatial_conv_backward,
    spatial_conv_forward,
)
from .spectral import (
    SpectralConvLayer,
    SpectralPoolLayer,
    channel_mix,
    spectral_conv_backward,
    spectral_conv_forward,
    spectral_pool_backward,
    spectral_pool_forward,
)

__all__ = [
    "ConvMode",
    "Domain",
    "GradBundle",
    "MaxPoolIndices",
    "PointwiseKind",
    "SpectralConvLayer",
    "SpectralPoolLayer",
    "channel_mix",
    "dense_backward",
    "dense_forward",
    "max_pool_backward",
    "max_pool_forward",
    "pointwise",
    "pointwise_grad",
    "spatial_conv_backward",
    "spatial_conv_forward",
    "spectral_conv_backward",
    "spectral_conv_forward",
    "spectral_pool_backward",
    "spectral_pool_forward",
]
