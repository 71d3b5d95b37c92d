"""Dense batched 4D tensors and the spectral primitives built on them."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from src.errors import (
    InvalidCropError,
    InvalidPadError,
    InvalidShapeError,
    NonFiniteError,
    ShapeMismatchError,
)

from .fft import fft2_array, ifft2_array


@dataclass(frozen=True)
class Shape4:
    """Batch, channel, height and width of a feature map."""

    s: int
    c: int
    h: int
    w: int

    def __post_init__(self):
        if min(self.s, self.c, self.h, self.w) < 1:
            raise InvalidShapeError(f"all dimensions must be >= 1, got {self.as_tuple()}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.s, self.c, self.h, self.w)

    @classmethod
    def of(cls, shape) -> "Shape4":
        if len(shape) != 4:
            raise InvalidShapeError(f"expected a 4D shape, got {tuple(shape)}")
        return cls(*(int(d) for d in shape))


def _frozen(data: np.ndarray, dtypes: tuple, label: str) -> np.ndarray:
    arr = np.asarray(data)
    if arr.dtype not in dtypes:
        arr = arr.astype(dtypes[0])
    if arr.ndim != 4:
        raise InvalidShapeError(f"{label} must be 4D (S, C, H, W), got ndim={arr.ndim}")
    Shape4.of(arr.shape)
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{label} contains non-finite values")
    view = arr.view()
    view.flags.writeable = False
    return view


class _Tensor4:
    data: np.ndarray

    @property
    def shape(self) -> Shape4:
        return Shape4.of(self.data.shape)

    def _coerce(self, other):
        if isinstance(other, _Tensor4):
            if other.data.shape != self.data.shape:
                raise ShapeMismatchError(
                    f"shapes differ: {self.data.shape} vs {other.data.shape}"
                )
            return other.data
        return other

    def _wrap(self, values: np.ndarray):
        return wrap(values)

    def __add__(self, other):
        return self._wrap(self.data + self._coerce(other))

    def __sub__(self, other):
        return self._wrap(self.data - self._coerce(other))

    def __mul__(self, other):
        return self._wrap(self.data * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.data)


@dataclass(frozen=True, eq=False)
class RealTensor4(_Tensor4):
    """Real (S, C, H, W) tensor, float64 unless built for benchmarks."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "data", _frozen(self.data, (np.float64, np.float32), "RealTensor4")
        )

    @classmethod
    def zeros(cls, shape) -> "RealTensor4":
        return cls(np.zeros(Shape4.of(shape).as_tuple()))


@dataclass(frozen=True, eq=False)
class ComplexTensor4(_Tensor4):
    """Complex (S, C, H, W) tensor."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self,
            "data",
            _frozen(self.data, (np.complex128, np.complex64), "ComplexTensor4"),
        )

    @classmethod
    def zeros(cls, shape) -> "ComplexTensor4":
        return cls(np.zeros(Shape4.of(shape).as_tuple(), dtype=np.complex128))


Tensor4 = Union[RealTensor4, ComplexTensor4]


def wrap(values: np.ndarray) -> Tensor4:
    """Wrap an array in the tensor type matching its dtype."""
    if np.iscomplexobj(values):
        return ComplexTensor4(values)
    return RealTensor4(values)


class BroadcastRule(Enum):
    """Shape agreement rules for elementwise products."""

    EXACT = "exact"
    OVER_BATCH = "over_batch"  # b has s == 1, reused for every sample
    OVER_CHANNEL = "over_channel"  # a has c == 1, reused for every channel


def fft2(t: Tensor4, allow_dft_fallback: bool = False) -> ComplexTensor4:
    """Unnormalized forward 2D DFT of every (s, c) plane."""
    return ComplexTensor4(fft2_array(t.data, allow_dft_fallback=allow_dft_fallback))


def ifft2(t: ComplexTensor4, allow_dft_fallback: bool = False) -> ComplexTensor4:
    """Inverse 2D DFT of every plane with 1/(H*W) normalization."""
    return ComplexTensor4(ifft2_array(t.data, allow_dft_fallback=allow_dft_fallback))


def elementwise_mul(
    a: ComplexTensor4, b: ComplexTensor4, broadcast: BroadcastRule = BroadcastRule.EXACT
) -> ComplexTensor4:
    """Complex Hadamard product under one of the supported broadcast rules."""
    sa, sb = a.shape, b.shape
    if broadcast is BroadcastRule.EXACT:
        ok = sa == sb
    elif broadcast is BroadcastRule.OVER_BATCH:
        ok = sb.s == 1 and (sa.c, sa.h, sa.w) == (sb.c, sb.h, sb.w)
    else:
        ok = sa.c == 1 and (sa.s, sa.h, sa.w) == (sb.s, sb.h, sb.w)
    if not ok:
        raise ShapeMismatchError(
            f"cannot multiply {sa.as_tuple()} by {sb.as_tuple()} under {broadcast.value}"
        )
    return ComplexTensor4(a.data * b.data)


def fftshift2(t: ComplexTensor4) -> ComplexTensor4:
    """Move DC to the plane center."""
    return ComplexTensor4(np.fft.fftshift(t.data, axes=(-2, -1)))


def ifftshift2(t: ComplexTensor4) -> ComplexTensor4:
    """Undo fftshift2."""
    return ComplexTensor4(np.fft.ifftshift(t.data, axes=(-2, -1)))


def _center_start(full: int, part: int) -> int:
    return full // 2 - part // 2


def center_crop_freq(t: ComplexTensor4, h2: int, w2: int) -> ComplexTensor4:
    """Keep the h2 x w2 lowest-frequency bins around DC."""
    shape = t.shape
    if not (1 <= h2 <= shape.h and 1 <= w2 <= shape.w):
        raise InvalidCropError(f"cannot crop {shape.h}x{shape.w} to {h2}x{w2}")
    centered = np.fft.fftshift(t.data, axes=(-2, -1))
    r0, c0 = _center_start(shape.h, h2), _center_start(shape.w, w2)
    block = centered[..., r0 : r0 + h2, c0 : c0 + w2]
    return ComplexTensor4(np.fft.ifftshift(block, axes=(-2, -1)))


def center_pad_freq(t: ComplexTensor4, h2: int, w2: int) -> ComplexTensor4:
    """Embed a spectrum into a larger one, zeros at the new high frequencies."""
    shape = t.shape
    if h2 < shape.h or w2 < shape.w:
        raise InvalidPadError(f"cannot pad {shape.h}x{shape.w} to {h2}x{w2}")
    out = np.zeros((shape.s, shape.c, h2, w2), dtype=t.data.dtype)
    r0, c0 = _center_start(h2, shape.h), _center_start(w2, shape.w)
    out[..., r0 : r0 + shape.h, c0 : c0 + shape.w] = np.fft.fftshift(
        t.data, axes=(-2, -1)
    )
    return ComplexTensor4(np.fft.ifftshift(out, axes=(-2, -1)))


def conj(t: ComplexTensor4) -> ComplexTensor4:
    return ComplexTensor4(np.conj(t.data))


def real_part(t: ComplexTensor4) -> RealTensor4:
    return RealTensor4(np.ascontiguousarray(t.data.real))


def pad_spatial(k: RealTensor4, h: int, w: int) -> RealTensor4:
    """Place a kernel at the origin corner of an h x w zero plane."""
    shape = k.shape
    if shape.h > h or shape.w > w:
        raise InvalidPadError(f"kernel {shape.h}x{shape.w} does not fit in {h}x{w}")
    out = np.zeros((shape.s, shape.c, h, w), dtype=k.data.dtype)
    out[..., : shape.h, : shape.w] = k.data
    return RealTensor4(out)
