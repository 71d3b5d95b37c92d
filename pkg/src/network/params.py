"""Parameter storage, initialization and the checkpoint file format.

Checkpoint layout (little-endian):

    b"SCLP" | version u32 | layer count u32
    per layer:  name (u16 length + utf-8) | entry count u16
    per entry:  name (u16 length + utf-8) | ndim u8 | tensor block
    trailer:    CRC32 u32 of every preceding byte

Momentum buffers are stored as entries named "momentum/<param>".
"""

from __future__ import annotations

import logging
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from src.errors import FormatError, ShapeMismatchError
from src.layers import PointwiseKind
from src.tensor import RealTensor4, tensor_from_bytes, tensor_to_bytes

from .specs import LayerKind, LayerSpec, NetworkSpec

logger = logging.getLogger(__name__)

MAGIC = b"SCLP"
VERSION = 1
_HEADER = struct.Struct("<4sII")
_MOMENTUM = "momentum/"

ParamGrads = Dict[str, Dict[str, np.ndarray]]


def param_shapes(layer: LayerSpec) -> Dict[str, tuple]:
    """Expected parameter shapes of a layer (empty when not learnable)."""
    if layer.kind in (LayerKind.SPATIAL_CONV, LayerKind.SPECTRAL_CONV):
        k = layer.kernel_size
        return {"kernels": (layer.out_channels, layer.in_channels, k, k)}
    if layer.kind is LayerKind.DENSE:
        return {
            "weight": (layer.out_features, layer.in_features),
            "bias": (layer.out_features,),
        }
    return {}


@dataclass
class ParamStore:
    """Learnable tensors and their momentum buffers, keyed by layer name."""

    params: Dict[str, Dict[str, np.ndarray]] = field(default_factory=dict)
    momentum: Dict[str, Dict[str, np.ndarray]] = field(default_factory=dict)

    def __post_init__(self):
        for layer, entries in self.params.items():
            buffers = self.momentum.setdefault(layer, {})
            for key, value in entries.items():
                buffers.setdefault(key, np.zeros_like(value))

    def copy(self) -> "ParamStore":
        return ParamStore(
            params={n: {k: v.copy() for k, v in e.items()} for n, e in self.params.items()},
            momentum={
                n: {k: v.copy() for k, v in e.items()} for n, e in self.momentum.items()
            },
        )

    def validate_against(self, spec: NetworkSpec) -> None:
        """Every learnable layer has exactly one entry with matching shapes."""
        expected = {layer.name: param_shapes(layer) for layer in spec.learnable_layers()}
        if set(expected) != set(self.params):
            raise ShapeMismatchError(
                f"store layers {sorted(self.params)} do not match {spec.name} "
                f"learnable layers {sorted(expected)}"
            )
        for name, shapes in expected.items():
            actual = {k: v.shape for k, v in self.params[name].items()}
            if actual != shapes:
                raise ShapeMismatchError(f"layer '{name}': expected {shapes}, got {actual}")

    def to_bytes(self) -> bytes:
        chunks = [_HEADER.pack(MAGIC, VERSION, len(self.params))]
        for layer, entries in self.params.items():
            items = list(entries.items()) + [
                (_MOMENTUM + k, v) for k, v in self.momentum.get(layer, {}).items()
            ]
            chunks.append(_pack_name(layer))
            chunks.append(struct.pack("<H", len(items)))
            for key, value in items:
                chunks.append(_pack_name(key))
                chunks.append(struct.pack("<B", value.ndim))
                four_d = value.reshape((1,) * (4 - value.ndim) + value.shape)
                chunks.append(tensor_to_bytes(RealTensor4(four_d)))
        body = b"".join(chunks)
        return body + struct.pack("<I", zlib.crc32(body))

    def checksum(self) -> int:
        """CRC32 over the serialized store."""
        return zlib.crc32(self.to_bytes())

    @classmethod
    def from_bytes(cls, buf: bytes) -> "ParamStore":
        if len(buf) < _HEADER.size + 4:
            raise FormatError("truncated parameter file", len(buf))
        body, trailer = buf[:-4], buf[-4:]
        (stored_crc,) = struct.unpack("<I", trailer)
        if zlib.crc32(body) != stored_crc:
            raise FormatError("CRC32 mismatch", len(body))
        magic, version, layer_count = _HEADER.unpack_from(body, 0)
        if magic != MAGIC:
            raise FormatError(f"bad parameter magic {magic!r}", 0)
        if version != VERSION:
            raise FormatError(f"unsupported parameter version {version}", 4)

        offset = _HEADER.size
        params: Dict[str, Dict[str, np.ndarray]] = {}
        momentum: Dict[str, Dict[str, np.ndarray]] = {}
        for _ in range(layer_count):
            layer, offset = _unpack_name(body, offset)
            (count,), offset = struct.unpack_from("<H", body, offset), offset + 2
            params[layer], momentum[layer] = {}, {}
            for _ in range(count):
                key, offset = _unpack_name(body, offset)
                (ndim,), offset = struct.unpack_from("<B", body, offset), offset + 1
                tensor, offset = tensor_from_bytes(body, offset)
                value = tensor.data.reshape(tensor.data.shape[4 - ndim :]).copy()
                if key.startswith(_MOMENTUM):
                    momentum[layer][key[len(_MOMENTUM) :]] = value
                else:
                    params[layer][key] = value
        if offset != len(body):
            raise FormatError("trailing bytes after last layer", offset)
        return cls(params=params, momentum=momentum)


def _pack_name(name: str) -> bytes:
    raw = name.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def _unpack_name(buf: bytes, offset: int) -> tuple[str, int]:
    if offset + 2 > len(buf):
        raise FormatError("truncated name length", offset)
    (length,) = struct.unpack_from("<H", buf, offset)
    start = offset + 2
    if start + length > len(buf):
        raise FormatError("truncated name", start)
    return buf[start : start + length].decode("utf-8"), start + length


def save_params(params: ParamStore, path) -> None:
    """Write a checkpoint file."""
    Path(path).write_bytes(params.to_bytes())
    logger.info("Saved parameters for %s layers to %s", len(params.params), path)


def load_params(path, spec: Optional[NetworkSpec] = None) -> ParamStore:
    """
    Read a checkpoint file.

    Args:
        path: Checkpoint path
        spec: When given, the store is validated against it

    Returns:
        ParamStore
    """
    store = ParamStore.from_bytes(Path(path).read_bytes())
    if spec is not None:
        store.validate_against(spec)
    return store


def _followed_by_relu(spec: NetworkSpec, index: int) -> bool:
    for layer in spec.layers[index + 1 :]:
        if layer.kind is LayerKind.POINTWISE:
            return layer.activation is PointwiseKind.RELU
        if layer.learnable:
            return False
    return False


def init_params(spec: NetworkSpec, seed: int = 0) -> ParamStore:
    """
    He-style scaled uniform initialization, deterministic in the seed.

    Bound is gain * sqrt(3 / fan_in) with gain sqrt(2) before a relu and 1 for
    linear layers. Biases start at zero.
    """
    learnable = [(i, layer) for i, layer in enumerate(spec.layers) if layer.learnable]
    streams = np.random.SeedSequence(seed).spawn(len(learnable))
    params: Dict[str, Dict[str, np.ndarray]] = {}
    for (index, layer), stream in zip(learnable, streams):
        rng = np.random.default_rng(stream)
        shapes = param_shapes(layer)
        gain = np.sqrt(2.0) if _followed_by_relu(spec, index) else 1.0
        if layer.kind is LayerKind.DENSE:
            fan_in = layer.in_features
            bound = gain * np.sqrt(3.0 / fan_in)
            params[layer.name] = {
                "weight": rng.uniform(-bound, bound, size=shapes["weight"]),
                "bias": np.zeros(shapes["bias"]),
            }
        else:
            fan_in = layer.in_channels * layer.kernel_size**2
            bound = gain * np.sqrt(3.0 / fan_in)
            params[layer.name] = {"kernels": rng.uniform(-bound, bound, size=shapes["kernels"])}
    return ParamStore(params=params)


def copy_backend(
    student: ParamStore, teacher: ParamStore, student_spec: NetworkSpec
) -> ParamStore:
    """Student store with dense layers copied from same-named teacher layers."""
    out = student.copy()
    for layer in student_spec.learnable_layers():
        if layer.kind is not LayerKind.DENSE or layer.name not in teacher.params:
            continue
        source = teacher.params[layer.name]
        if {k: v.shape for k, v in source.items()} != param_shapes(layer):
            raise ShapeMismatchError(f"teacher backend '{layer.name}' has a different shape")
        out.params[layer.name] = {k: v.copy() for k, v in source.items()}
        out.momentum[layer.name] = {k: np.zeros_like(v) for k, v in source.items()}
        logger.info("Initialized student backend '%s' from teacher", layer.name)
    return out
