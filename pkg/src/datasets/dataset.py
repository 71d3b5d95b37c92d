"""In-memory labelled image sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.errors import ShapeMismatchError
from src.tensor import RealTensor4


@dataclass(frozen=True, eq=False)
class Dataset:
    """Images scaled to [0, 1] with one class index per image."""

    images: RealTensor4
    labels: np.ndarray
    split: str
    name: str
    class_count: int = 10

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        if labels.ndim != 1 or labels.shape[0] != self.images.shape.s:
            raise ShapeMismatchError(
                f"{self.name}/{self.split}: {labels.shape[0]} labels for "
                f"{self.images.shape.s} images"
            )
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise ValueError(f"{self.name}/{self.split}: labels outside [0, {self.class_count})")
        data = self.images.data
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise ValueError(f"{self.name}/{self.split}: pixel values outside [0, 1]")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def take(self, indices) -> tuple[RealTensor4, np.ndarray]:
        """Images and labels at the given positions."""
        indices = np.asarray(indices, dtype=np.int64)
        return RealTensor4(self.images.data[indices]), self.labels[indices]

    def subset(self, count: int) -> "Dataset":
        """First `count` samples (all when count is larger)."""
        count = min(count, len(self))
        return Dataset(
            images=RealTensor4(self.images.data[:count]),
            labels=self.labels[:count],
            split=self.split,
            name=self.name,
            class_count=self.class_count,
        )
