"""Tensor module - batched real/complex feature maps and spectral primitives."""

from .fft import fft2_array, ifft2_array, is_power_of_two, naive_dft2
from .serialization import load_tensor, save_tensor, tensor_from_bytes, tensor_to_bytes
from .tensor4 import (
    BroadcastRule,
    ComplexTensor4,
    RealTensor4,
    Shape4,
    Tensor4,
    center_crop_freq,
    center_pad_freq,
    conj,
    elementwise_mul,
    fft2,
    fftshift2,
    ifft2,
    ifftshift2,
    pad_spatial,
    real_part,
    wrap,
)

__all__ = [
    "BroadcastRule",
    "ComplexTensor4",
    "RealTensor4",
    "Shape4",
    "Tensor4",
    "center_crop_freq",
    "center_pad_freq",
    "conj",
    "elementwise_mul",
    "fft2",
    "fft2_array",
    "fftshift2",
    "ifft2",
    "ifft2_array",
    "ifftshift2",
    "is_power_of_two",
    "load_tensor",
    "naive_dft2",
    "pad_spatial",
    "real_part",
    "save_tensor",
    "tensor_from_bytes",
    "tensor_to_bytes",
    "wrap",
]
