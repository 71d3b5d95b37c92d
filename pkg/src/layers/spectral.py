"""Spectral convolution and spectral pooling.

Complex gradients follow the convention G = dL/dRe(Z) + i*dL/dIm(Z). Under it
the adjoint of a Hadamard product conjugates the fixed factor, and the adjoint
of fft2 restricted to real inputs is H*W*real(ifft2(G)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.errors import ShapeMismatchError, StateError
from src.tensor import (
    ComplexTensor4,
    RealTensor4,
    Tensor4,
    center_crop_freq,
    center_pad_freq,
    fft2,
    fft2_array,
    ifft2,
    ifft2_array,
    pad_spatial,
    real_part,
)

from .base import Domain, GradBundle


def channel_mix(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """
    Per-frequency channel contraction.

    Args:
        x: (S, A, H, W) array
        k: (A, B, H, W) array

    Returns:
        (S, B, H, W) array with out[s, b] = sum_a x[s, a] * k[a, b]
    """
    xt = np.transpose(x, (2, 3, 0, 1))
    kt = np.transpose(k, (2, 3, 0, 1))
    return np.ascontiguousarray(np.transpose(xt @ kt, (2, 3, 0, 1)))


@dataclass
class SpectralConvLayer:
    """Spatially stored k x k kernels applied as spectral elementwise products."""

    kernels: RealTensor4
    input_hw: Tuple[int, int]
    cached_spectra: Optional[ComplexTensor4] = None

    @property
    def out_channels(self) -> int:
        return self.kernels.shape.s

    @property
    def in_channels(self) -> int:
        return self.kernels.shape.c

    @property
    def kernel_size(self) -> int:
        return self.kernels.shape.h

    def spectra(self) -> ComplexTensor4:
        """FFT of the zero-padded kernels, computed once per kernel value."""
        if self.cached_spectra is None:
            h, w = self.input_hw
            self.cached_spectra = fft2(pad_spatial(self.kernels, h, w))
        return self.cached_spectra

    def with_kernels(self, kernels: RealTensor4) -> "SpectralConvLayer":
        """New layer for updated kernels; spectra are recomputed lazily."""
        return SpectralConvLayer(kernels=kernels, input_hw=self.input_hw)


def spectral_conv_forward(layer: SpectralConvLayer, X: ComplexTensor4) -> ComplexTensor4:
    """Y[s, o] = sum_i X[s, i] * K[o, i]."""
    shape = X.shape
    if (shape.h, shape.w) != tuple(layer.input_hw):
        raise ShapeMismatchError(
            f"spectral conv expects {layer.input_hw} planes, got {(shape.h, shape.w)}"
        )
    if shape.c != layer.in_channels:
        raise ShapeMismatchError(
            f"spectral conv expects {layer.in_channels} channels, got {shape.c}"
        )
    K = layer.spectra().data
    return ComplexTensor4(channel_mix(X.data, np.transpose(K, (1, 0, 2, 3))))


def spectral_conv_backward(
    layer: SpectralConvLayer, X0: Optional[ComplexTensor4], sigma_Y: ComplexTensor4
) -> GradBundle:
    """
    Gradients of a spectral convolution.

    Args:
        layer: Layer used in the forward pass
        X0: Forward input
        sigma_Y: Upstream gradient w.r.t. the output spectrum

    Returns:
        GradBundle with sigma_X as input_grad and the spatial kernel gradient,
        cropped to the k x k support, under "kernels"
    """
    if X0 is None:
        raise StateError("spectral conv backward needs the cached forward input")
    expected = (X0.shape.s, layer.out_channels, *layer.input_hw)
    if sigma_Y.shape.as_tuple() != expected:
        raise ShapeMismatchError(
            f"upstream gradient {sigma_Y.shape.as_tuple()} does not match output {expected}"
        )

    K = layer.spectra().data
    sigma_X = channel_mix(sigma_Y.data, np.conj(K))
    delta_K = channel_mix(
        np.transpose(sigma_Y.data, (1, 0, 2, 3)), np.conj(X0.data)
    )

    h, w = layer.input_hw
    k = layer.kernel_size
    full = (h * w) * ifft2_array(delta_K).real
    kernel_grad = np.ascontiguousarray(full[..., :k, :k])

    return GradBundle(
        input_grad=ComplexTensor4(sigma_X),
        param_grads={"kernels": RealTensor4(kernel_grad)},
    )


@dataclass(frozen=True)
class SpectralPoolLayer:
    """Low-pass crop of the centered spectrum to out_hw."""

    out_hw: Tuple[int, int]

    def scale(self, in_hw: Tuple[int, int]) -> float:
        """Factor that keeps DC values (constant images stay constant)."""
        return (self.out_hw[0] * self.out_hw[1]) / (in_hw[0] * in_hw[1])


def spectral_pool_forward(
    layer: SpectralPoolLayer, t: Tensor4, domain: Domain = Domain.SPECTRAL
) -> Tensor4:
    h2, w2 = layer.out_hw
    shape = t.shape
    r = layer.scale((shape.h, shape.w))
    if domain is Domain.SPECTRAL:
        if not isinstance(t, ComplexTensor4):
            raise ShapeMismatchError("spectral-domain pooling needs a complex tensor")
        return center_crop_freq(t, h2, w2) * r
    return real_part(ifft2(center_crop_freq(fft2(t), h2, w2) * r))


def spectral_pool_backward(
    layer: SpectralPoolLayer,
    g: Tensor4,
    in_hw: Tuple[int, int],
    domain: Domain = Domain.SPECTRAL,
) -> Tensor4:
    """Adjoint of spectral_pool_forward."""
    h, w = in_hw
    shape = g.shape
    if (shape.h, shape.w) != tuple(layer.out_hw):
        raise ShapeMismatchError(
            f"pool gradient {(shape.h, shape.w)} does not match output {layer.out_hw}"
        )
    if domain is Domain.SPECTRAL:
        return center_pad_freq(g, h, w) * layer.scale(in_hw)
    # scale r cancels the HW/(H'W') of the two transform adjoints
    spectrum = ComplexTensor4(fft2_array(g.data))
    return RealTensor4(np.ascontiguousarray(ifft2_array(center_pad_freq(spectrum, h, w).data).real))
