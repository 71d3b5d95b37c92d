"""Binary tensor blocks: 32-byte header followed by little-endian f64 data.

Header layout (little-endian):

    [offset] [type]     [value]
    0000     4 bytes    b"SCLC" magic
    0004     u32        format version
    0008     4 x u32    S, C, H, W
    0024     u32        dtype code (1 = real f64, 2 = complex f64 re/im pairs)
    0028     4 bytes    reserved, zero
"""

from __future__ import annotations

import struct

import numpy as np

from src.errors import FormatError

from .tensor4 import ComplexTensor4, RealTensor4, Tensor4

MAGIC = b"SCLC"
VERSION = 1
HEADER = struct.Struct("<4sI4II4x")
DTYPE_REAL = 1
DTYPE_COMPLEX = 2


def tensor_to_bytes(t: Tensor4) -> bytes:
    """Serialize a tensor block."""
    if isinstance(t, ComplexTensor4):
        dtype_code = DTYPE_COMPLEX
        payload = np.ascontiguousarray(t.data, dtype="<c16").tobytes()
    else:
        dtype_code = DTYPE_REAL
        payload = np.ascontiguousarray(t.data, dtype="<f8").tobytes()
    header = HEADER.pack(MAGIC, VERSION, *t.shape.as_tuple(), dtype_code)
    return header + payload


def tensor_from_bytes(buf: bytes, offset: int = 0) -> tuple[Tensor4, int]:
    """
    Parse one tensor block.

    Args:
        buf: Buffer holding the block
        offset: Byte position where the block starts

    Returns:
        (tensor, offset just past the block)
    """
    if len(buf) - offset < HEADER.size:
        raise FormatError("truncated tensor header", offset)
    magic, version, s, c, h, w, dtype_code = HEADER.unpack_from(buf, offset)
    if magic != MAGIC:
        raise FormatError(f"bad tensor magic {magic!r}", offset)
    if version != VERSION:
        raise FormatError(f"unsupported tensor version {version}", offset + 4)
    if dtype_code not in (DTYPE_REAL, DTYPE_COMPLEX):
        raise FormatError(f"unknown dtype code {dtype_code}", offset + 24)

    start = offset + HEADER.size
    count = s * c * h * w
    item = 16 if dtype_code == DTYPE_COMPLEX else 8
    end = start + count * item
    if end > len(buf):
        raise FormatError("truncated tensor payload", start)

    dtype = "<c16" if dtype_code == DTYPE_COMPLEX else "<f8"
    values = np.frombuffer(buf, dtype=dtype, count=count, offset=start).reshape(s, c, h, w)
    values = values.astype(np.complex128 if dtype_code == DTYPE_COMPLEX else np.float64)
    tensor = ComplexTensor4(values) if dtype_code == DTYPE_COMPLEX else RealTensor4(values)
    return tensor, end


def save_tensor(t: Tensor4, path) -> None:
    with open(path, "wb") as fh:
        fh.write(tensor_to_bytes(t))


def load_tensor(path) -> Tensor4:
    with open(path, "rb") as fh:
        buf = fh.read()
    tensor, end = tensor_from_bytes(buf)
    if end != len(buf):
        raise FormatError("trailing bytes after tensor block", end)
    return tensor
