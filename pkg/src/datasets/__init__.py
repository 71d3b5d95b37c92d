"""Datasets module - MNIST / CIFAR-10 readers and resolution resampling."""

from .dataset import Dataset
from .loaders import (
    DATASET_LAYOUT,
    load_cifar10,
    load_mnist,
    parse_cifar_batch,
    parse_idx_images,
    parse_idx_labels,
    resample,
)

__all__ = [
    "DATASET_LAYOUT",
    "Dataset",
    "load_cifar10",
    "load_mnist",
    "parse_cifar_batch",
    "parse_idx_images",
    "parse_idx_labels",
    "resample",
]
