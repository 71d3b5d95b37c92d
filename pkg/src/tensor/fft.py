"""Radix-2 Cooley-Tukey FFT over the two trailing axes of an array."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from src.errors import UnsupportedShapeError


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=64)
def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=128)
def _twiddles(m: int, inverse: bool) -> np.ndarray:
    sign = 1.0 if inverse else -1.0
    return np.exp(sign * 2j * np.pi * np.arange(m // 2) / m)


def _radix2_last_axis(x: np.ndarray, inverse: bool) -> np.ndarray:
    """Unnormalized iterative DIT transform along the last axis."""
    n = x.shape[-1]
    lead = x.shape[:-1]
    y = x[..., _bit_reverse_indices(n)].astype(np.complex128)
    m = 2
    while m <= n:
        half = m // 2
        blocks = y.reshape(*lead, n // m, m)
        u = blocks[..., :half]
        t = blocks[..., half:] * _twiddles(m, inverse)
        y = np.concatenate([u + t, u - t], axis=-1).reshape(*lead, n)
        m <<= 1
    return y


@lru_cache(maxsize=64)
def _dft_matrix(n: int, inverse: bool) -> np.ndarray:
    sign = 1.0 if inverse else -1.0
    k = np.arange(n)
    return np.exp(sign * 2j * np.pi * np.outer(k, k) / n)


def _dft_last_axis(x: np.ndarray, inverse: bool) -> np.ndarray:
    """Naive O(N^2) transform along the last axis."""
    return np.asarray(x, dtype=np.complex128) @ _dft_matrix(x.shape[-1], inverse).T


def _transform2(x: np.ndarray, inverse: bool, allow_dft_fallback: bool) -> np.ndarray:
    h, w = x.shape[-2], x.shape[-1]
    fast = is_power_of_two(h) and is_power_of_two(w)
    if not fast and not allow_dft_fallback:
        raise UnsupportedShapeError(
            f"radix-2 FFT needs power-of-two planes, got {h}x{w}"
        )
    along = _radix2_last_axis if fast else _dft_last_axis
    rows = along(x, inverse)
    cols = along(np.swapaxes(rows, -1, -2), inverse)
    out = np.swapaxes(cols, -1, -2)
    if inverse:
        out = out / (h * w)
    return out


def fft2_array(x: np.ndarray, allow_dft_fallback: bool = False) -> np.ndarray:
    """Forward 2D DFT over the trailing axes, no normalization."""
    return _transform2(x, inverse=False, allow_dft_fallback=allow_dft_fallback)


def ifft2_array(x: np.ndarray, allow_dft_fallback: bool = False) -> np.ndarray:
    """Inverse 2D DFT over the trailing axes, scaled by 1/(H*W)."""
    return _transform2(x, inverse=True, allow_dft_fallback=allow_dft_fallback)


def naive_dft2(x: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Reference 2D DFT built from DFT matrices; accepts any plane size."""
    rows = _dft_last_axis(x, inverse)
    out = np.swapaxes(_dft_last_axis(np.swapaxes(rows, -1, -2), inverse), -1, -2)
    if inverse:
        out = out / (x.shape[-2] * x.shape[-1])
    return out
