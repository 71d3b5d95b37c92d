"""Direct spatial convolution and max pooling for the teacher network."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.errors import InvalidShapeError, ShapeMismatchError
from src.tensor import RealTensor4

from .base import ConvMode, GradBundle


def _shift_zero(x: np.ndarray, d1: int, d2: int) -> np.ndarray:
    """out[..., n1, n2] = x[..., n1 + d1, n2 + d2], zero where out of range."""
    h, w = x.shape[-2], x.shape[-1]
    out = np.zeros_like(x)
    r0, r1 = max(0, -d1), min(h, h - d1)
    c0, c1 = max(0, -d2), min(w, w - d2)
    if r0 < r1 and c0 < c1:
        out[..., r0:r1, c0:c1] = x[..., r0 + d1 : r1 + d1, c0 + d2 : c1 + d2]
    return out


def _tap(x: np.ndarray, m1: int, m2: int, kh: int, kw: int, mode: ConvMode) -> np.ndarray:
    """Input plane seen by kernel tap (m1, m2): x[n - m] (circular) or x[n - m + c]."""
    if mode is ConvMode.CIRCULAR:
        return np.roll(x, shift=(m1, m2), axis=(-2, -1))
    return _shift_zero(x, (kh - 1) // 2 - m1, (kw - 1) // 2 - m2)


def _untap(g: np.ndarray, m1: int, m2: int, kh: int, kw: int, mode: ConvMode) -> np.ndarray:
    """Adjoint of _tap."""
    if mode is ConvMode.CIRCULAR:
        return np.roll(g, shift=(-m1, -m2), axis=(-2, -1))
    return _shift_zero(g, m1 - (kh - 1) // 2, m2 - (kw - 1) // 2)


def _check(k: RealTensor4, x: RealTensor4) -> None:
    ks, xs = k.shape, x.shape
    if ks.c != xs.c:
        raise ShapeMismatchError(f"kernel expects {ks.c} input channels, image has {xs.c}")
    if ks.h > xs.h or ks.w > xs.w:
        raise InvalidShapeError(f"kernel {ks.h}x{ks.w} larger than image {xs.h}x{xs.w}")


def spatial_conv_forward(
    k: RealTensor4, x: RealTensor4, mode: ConvMode = ConvMode.ZERO_PAD
) -> RealTensor4:
    """
    Stride-1 2D convolution summed over input channels.

    Args:
        k: (C_out, C_in, kh, kw) kernels
        x: (S, C_in, H, W) images
        mode: circular wraps indices, zero_pad is the centered same-size convolution

    Returns:
        (S, C_out, H, W) output
    """
    _check(k, x)
    kd = k.data
    kh, kw = kd.shape[-2], kd.shape[-1]
    xs = x.shape
    acc = np.zeros((xs.s, xs.h, xs.w, kd.shape[0]))
    for m1 in range(kh):
        for m2 in range(kw):
            tapped = _tap(x.data, m1, m2, kh, kw, mode)
            acc += np.tensordot(tapped, kd[:, :, m1, m2], axes=([1], [1]))
    return RealTensor4(np.ascontiguousarray(np.moveaxis(acc, -1, 1)))


def spatial_conv_backward(
    k: RealTensor4, x: RealTensor4, g: RealTensor4, mode: ConvMode = ConvMode.ZERO_PAD
) -> GradBundle:
    """Input and kernel gradients of spatial_conv_forward."""
    _check(k, x)
    kd = k.data
    kh, kw = kd.shape[-2], kd.shape[-1]
    xs = x.shape
    if g.shape.as_tuple() != (xs.s, kd.shape[0], xs.h, xs.w):
        raise ShapeMismatchError(
            f"upstream gradient {g.shape.as_tuple()} does not match output "
            f"{(xs.s, kd.shape[0], xs.h, xs.w)}"
        )
    input_acc = np.zeros((xs.s, xs.h, xs.w, xs.c))
    kernel_grad = np.zeros_like(kd, dtype=np.float64)
    for m1 in range(kh):
        for m2 in range(kw):
            tapped = _tap(x.data, m1, m2, kh, kw, mode)
            untapped = _untap(g.data, m1, m2, kh, kw, mode)
            kernel_grad[:, :, m1, m2] = np.tensordot(
                g.data, tapped, axes=([0, 2, 3], [0, 2, 3])
            )
            input_acc += np.tensordot(untapped, kd[:, :, m1, m2], axes=([1], [0]))
    return GradBundle(
        input_grad=RealTensor4(np.ascontiguousarray(np.moveaxis(input_acc, -1, 1))),
        param_grads={"kernels": RealTensor4(kernel_grad)},
    )


@dataclass(frozen=True)
class MaxPoolIndices:
    """Argmax positions recorded by max_pool_forward."""

    flat: np.ndarray  # (S, C, Ho, Wo) indices into the H*W plane
    input_hw: Tuple[int, int]


def max_pool_forward(
    x: RealTensor4, k: int, stride: Optional[int] = None
) -> tuple[RealTensor4, MaxPoolIndices]:
    """Per-window maximum; ties resolve to the first row-major element."""
    stride = stride or k
    xs = x.shape
    if k > xs.h or k > xs.w:
        raise InvalidShapeError(f"pool window {k} larger than image {xs.h}x{xs.w}")
    windows = sliding_window_view(x.data, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = windows.shape[2], windows.shape[3]
    flat_windows = windows.reshape(xs.s, xs.c, ho, wo, k * k)
    local = np.argmax(flat_windows, axis=-1)
    out = np.take_along_axis(flat_windows, local[..., None], axis=-1)[..., 0]

    rows = np.arange(ho)[:, None] * stride + local // k
    cols = np.arange(wo)[None, :] * stride + local % k
    flat = rows * xs.w + cols
    return RealTensor4(np.ascontiguousarray(out)), MaxPoolIndices(flat, (xs.h, xs.w))


def max_pool_backward(indices: MaxPoolIndices, g: RealTensor4) -> RealTensor4:
    """Scatter upstream gradient to the recorded argmax positions."""
    if g.data.shape != indices.flat.shape:
        raise ShapeMismatchError(
            f"pool gradient {g.data.shape} does not match indices {indices.flat.shape}"
        )
    s, c = g.data.shape[:2]
    h, w = indices.input_hw
    out = np.zeros((s, c, h * w))
    np.add.at(
        out,
        (
            np.arange(s)[:, None, None, None],
            np.arange(c)[None, :, None, None],
            indices.flat,
        ),
        g.data,
    )
    return RealTensor4(out.reshape(s, c, h, w))
