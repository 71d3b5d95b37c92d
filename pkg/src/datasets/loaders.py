"""Readers for the published MNIST (IDX) and CIFAR-10 (binary) layouts."""

from __future__ import annotations

import gzip
import logging
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from src.errors import FormatError, InvalidShapeError
from src.tensor import RealTensor4, is_power_of_two

from .dataset import Dataset

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049
CIFAR_RECORD = 1 + 3 * 32 * 32
CIFAR_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST_FILES = ("test_batch.bin",)
# channels and class count of each supported dataset
DATASET_LAYOUT = {"mnist": (1, 10), "cifar10": (3, 10)}
MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _read(path: Path) -> bytes:
    if path.exists():
        return path.read_bytes()
    gz = path.with_name(path.name + ".gz")
    if gz.exists():
        with gzip.open(gz, "rb") as fh:
            return fh.read()
    raise FileNotFoundError(f"neither {path} nor {gz} exists")


def parse_idx_images(buf: bytes) -> np.ndarray:
    """
    Parse an IDX3 image file.

    The file is big-endian:
      [offset] [type]  [value]
      0000     u32     2051 magic
      0004     u32     number of images
      0008     u32     rows
      0012     u32     columns
      0016     u8...   pixels, row-major
    """
    if len(buf) < 16:
        raise FormatError("truncated IDX image header", len(buf))
    magic, count, rows, cols = struct.unpack_from(">IIII", buf, 0)
    if magic != IDX_IMAGES_MAGIC:
        raise FormatError(f"bad IDX image magic {magic}", 0)
    expected = 16 + count * rows * cols
    if len(buf) != expected:
        raise FormatError(f"IDX image file should be {expected} bytes, got {len(buf)}", len(buf))
    return np.frombuffer(buf, dtype=np.uint8, offset=16).reshape(count, rows, cols)


def parse_idx_labels(buf: bytes) -> np.ndarray:
    """Parse an IDX1 label file (magic 2049, count, then one byte per label)."""
    if len(buf) < 8:
        raise FormatError("truncated IDX label header", len(buf))
    magic, count = struct.unpack_from(">II", buf, 0)
    if magic != IDX_LABELS_MAGIC:
        raise FormatError(f"bad IDX label magic {magic}", 0)
    if len(buf) != 8 + count:
        raise FormatError(f"IDX label file should be {8 + count} bytes, got {len(buf)}", len(buf))
    return np.frombuffer(buf, dtype=np.uint8, offset=8)


def load_mnist(directory, split: str = "train", limit: Optional[int] = None) -> Dataset:
    """
    Load an MNIST split, zero-padded from 28x28 to 32x32.

    Args:
        directory: Folder with the (optionally gzipped) IDX files
        split: "train" or "test"
        limit: Keep only the first `limit` samples

    Returns:
        Dataset with images of shape (N, 1, 32, 32) divided by 255
    """
    image_name, label_name = MNIST_FILES[split]
    root = Path(directory)
    images = parse_idx_images(_read(root / image_name))
    labels = parse_idx_labels(_read(root / label_name))
    if images.shape[0] != labels.shape[0]:
        raise FormatError(
            f"{images.shape[0]} images but {labels.shape[0]} labels in MNIST {split}", 4
        )
    if labels.size and labels.max() > 9:
        raise FormatError(f"label {labels.max()} out of range", 8 + int(np.argmax(labels > 9)))
    if limit is not None:
        images, labels = images[:limit], labels[:limit]

    rows, cols = images.shape[1:]
    side = 1 << max(rows - 1, cols - 1, 0).bit_length()
    top, left = (side - rows) // 2, (side - cols) // 2
    padded = np.zeros((images.shape[0], 1, side, side))
    padded[:, 0, top : top + rows, left : left + cols] = images / 255.0
    logger.info("Loaded MNIST %s: %s images padded to %sx%s", split, len(labels), side, side)
    _, classes = DATASET_LAYOUT["mnist"]
    return Dataset(RealTensor4(padded), labels.astype(np.int64), split, "mnist", classes)


def parse_cifar_batch(buf: bytes) -> tuple[np.ndarray, np.ndarray]:
    """Records of 3073 bytes: label byte then 3 x 32 x 32 channel-major pixels."""
    if len(buf) % CIFAR_RECORD:
        usable = len(buf) - len(buf) % CIFAR_RECORD
        partial = len(buf) - usable
        raise FormatError(f"CIFAR-10 batch has a partial record of {partial} bytes", usable)
    records = np.frombuffer(buf, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = records[:, 0]
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise FormatError(f"label {labels[bad[0]]} out of range", int(bad[0]) * CIFAR_RECORD)
    return records[:, 1:].reshape(-1, 3, 32, 32), labels


def load_cifar10(directory, split: str = "train", limit: Optional[int] = None) -> Dataset:
    """
    Load a CIFAR-10 split from the binary distribution.

    Args:
        directory: Folder with data_batch_*.bin / test_batch.bin, or its parent
            holding cifar-10-batches-bin/
        split: "train" or "test"
        limit: Keep only the first `limit` samples

    Returns:
        Dataset with images of shape (N, 3, 32, 32) divided by 255
    """
    root = Path(directory)
    if (root / "cifar-10-batches-bin").is_dir():
        root = root / "cifar-10-batches-bin"
    names = CIFAR_TRAIN_FILES if split == "train" else CIFAR_TEST_FILES

    batches, label_batches, total = [], [], 0
    for name in names:
        if limit is not None and total >= limit:
            break
        path = root / name
        if not path.exists():
            raise FileNotFoundError(f"missing CIFAR-10 file {path}")
        pixels, labels = parse_cifar_batch(path.read_bytes())
        batches.append(pixels)
        label_batches.append(labels)
        total += labels.shape[0]

    pixels = np.concatenate(batches)[:limit]
    labels = np.concatenate(label_batches)[:limit]
    logger.info("Loaded CIFAR-10 %s: %s images", split, len(labels))
    _, classes = DATASET_LAYOUT["cifar10"]
    return Dataset(RealTensor4(pixels / 255.0), labels.astype(np.int64), split, "cifar10", classes)


def resample(d: Dataset, side: int) -> Dataset:
    """
    Change the image side by box-filter averaging or zero insertion.

    Args:
        d: Square-image dataset
        side: Target side, a power of two

    Returns:
        New dataset (d itself when side already matches)
    """
    shape = d.images.shape
    if not is_power_of_two(side):
        raise InvalidShapeError(f"resample side must be a power of two, got {side}")
    if shape.h != shape.w or not is_power_of_two(shape.h):
        raise InvalidShapeError(
            f"resample needs square power-of-two images, got {shape.h}x{shape.w}"
        )
    if side == shape.h:
        return d

    data = d.images.data
    if side < shape.h:
        f = shape.h // side
        out = data.reshape(shape.s, shape.c, side, f, side, f).mean(axis=(3, 5))
    else:
        f = side // shape.h
        out = np.zeros((shape.s, shape.c, side, side))
        out[..., ::f, ::f] = data
    return Dataset(RealTensor4(out), d.labels, d.split, d.name, d.class_count)
