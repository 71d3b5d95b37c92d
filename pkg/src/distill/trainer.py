"""Plain and distillation training loops, evaluation and run history."""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from time import perf_counter
from typing import Callable, List, Optional

import numpy as np

from src.datasets import Dataset
from src.errors import EmptyDatasetError, NonFiniteError
from src.network import (
    NetworkSpec,
    ParamGrads,
    ParamStore,
    backward,
    build_runtime,
    forward,
)

from .config import TrainConfig
from .losses import LossResult, cross_entropy, kd_loss, softmax
from .optimizer import sgd_step

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = (
    "epoch",
    "train_loss",
    "student_loss_term",
    "temp_loss_term",
    "test_accuracy",
    "wall_ms",
)
EVAL_BATCH = 256

_parallel_training = threading.Event()


def parallel_training_active() -> bool:
    """True while a multi-worker training loop runs in this process."""
    return _parallel_training.is_set()


@dataclass(frozen=True)
class EpochRecord:
    """Per-epoch training summary."""

    epoch: int
    train_loss: float
    student_loss_term: float
    temp_loss_term: float
    test_accuracy: float
    wall_ms: float


@dataclass
class History:
    """Training records of one run."""

    initial_test_accuracy: float
    records: List[EpochRecord] = field(default_factory=list)

    def rows(self, include_wall_time: bool = True) -> List[list]:
        columns = HISTORY_COLUMNS if include_wall_time else HISTORY_COLUMNS[:-1]
        return [[getattr(r, c) for c in columns] for r in self.records]

    def to_csv(self, include_wall_time: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        columns = HISTORY_COLUMNS if include_wall_time else HISTORY_COLUMNS[:-1]
        writer.writerow(columns)
        for row in self.rows(include_wall_time):
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()

    def digest(self) -> str:
        """SHA-256 of the CSV without the wall-clock column."""
        return hashlib.sha256(self.to_csv(include_wall_time=False).encode()).hexdigest()

    @property
    def final_accuracy(self) -> float:
        return self.records[-1].test_accuracy if self.records else self.initial_test_accuracy


@dataclass
class TrainResult:
    """Trained parameters and their history."""

    params: ParamStore
    history: History


def predict_logits(
    net: NetworkSpec, params: ParamStore, dataset: Dataset, batch_size: int = EVAL_BATCH
) -> np.ndarray:
    """Logits for every sample, in dataset order."""
    if len(dataset) == 0:
        raise EmptyDatasetError(f"{dataset.name}/{dataset.split} is empty")
    runtime = build_runtime(net, params)
    chunks = []
    for start in range(0, len(dataset), batch_size):
        images, _ = dataset.take(np.arange(start, min(start + batch_size, len(dataset))))
        logits, _ = forward(net, params, images, runtime=runtime)
        chunks.append(logits)
    return np.concatenate(chunks)


def evaluate(
    net: NetworkSpec, params: ParamStore, dataset: Dataset, batch_size: int = EVAL_BATCH
) -> float:
    """Fraction of samples whose argmax logit equals the label."""
    logits = predict_logits(net, params, dataset, batch_size)
    return float(np.mean(np.argmax(logits, axis=1) == dataset.labels))


LossFn = Callable[[np.ndarray, np.ndarray, np.ndarray], LossResult]


def _chunk_step(net, params, runtime, dataset, indices, loss_fn, weight):
    images, labels = dataset.take(indices)
    logits, tape = forward(net, params, images, record_tape=True, runtime=runtime)
    result = loss_fn(logits, labels, indices)
    grads = backward(net, params, tape, result.logit_grad * weight)
    return result, grads


def _accumulate(total: Optional[ParamGrads], grads: ParamGrads) -> ParamGrads:
    if total is None:
        return {n: {k: v.copy() for k, v in e.items()} for n, e in grads.items()}
    for name, entries in grads.items():
        for key, value in entries.items():
            total[name][key] += value
    return total


def _fit(
    net: NetworkSpec,
    params: ParamStore,
    train: Dataset,
    test: Dataset,
    cfg: TrainConfig,
    loss_fn: LossFn,
    label: str,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainResult:
    if len(train) == 0:
        raise EmptyDatasetError(f"{train.name}/{train.split} is empty")
    rng = np.random.default_rng(cfg.seed)
    history = History(initial_test_accuracy=evaluate(net, params, test))
    logger.info(
        "Training %s (%s) for %s epochs: lr=%s batch=%s initial_acc=%.4f",
        net.name,
        label,
        cfg.epochs,
        cfg.lr,
        cfg.batch_size,
        history.initial_test_accuracy,
    )

    pool = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    if pool is not None:
        _parallel_training.set()
    try:
        for epoch in range(1, cfg.epochs + 1):
            start = perf_counter()
            order = rng.permutation(len(train))
            sums = np.zeros(3)
            batches = 0
            for b, first in enumerate(range(0, len(train), cfg.batch_size)):
                batch = order[first : first + cfg.batch_size]
                chunks = [c for c in np.array_split(batch, cfg.workers) if c.size]
                runtime = build_runtime(net, params)
                jobs = [(c, c.size / batch.size) for c in chunks]

                def run(job):
                    indices, weight = job
                    return _chunk_step(net, params, runtime, train, indices, loss_fn, weight)

                outputs = list(pool.map(run, jobs)) if pool else [run(j) for j in jobs]
                loss = sum(w * r.loss for (_, w), (r, _) in zip(jobs, outputs))
                if not np.isfinite(loss):
                    raise NonFiniteError(
                        f"{net.name}: non-finite loss {loss} at epoch {epoch}, batch {b}"
                    )
                grads: Optional[ParamGrads] = None
                for _, chunk_grads in outputs:
                    grads = _accumulate(grads, chunk_grads)
                params = sgd_step(params, grads, cfg)

                sums += [
                    loss,
                    sum(w * r.student_term for (_, w), (r, _) in zip(jobs, outputs)),
                    sum(w * r.temp_term for (_, w), (r, _) in zip(jobs, outputs)),
                ]
                batches += 1

            accuracy = evaluate(net, params, test)
            record = EpochRecord(
                epoch=epoch,
                train_loss=float(sums[0] / batches),
                student_loss_term=float(sums[1] / batches),
                temp_loss_term=float(sums[2] / batches),
                test_accuracy=accuracy,
                wall_ms=(perf_counter() - start) * 1000.0,
            )
            history.records.append(record)
            logger.info(
                "%s epoch %s: loss=%.4f acc=%.4f (%.0f ms)",
                net.name,
                epoch,
                record.train_loss,
                accuracy,
                record.wall_ms,
            )
            if on_epoch is not None:
                on_epoch(record)
    finally:
        if pool is not None:
            pool.shutdown()
            _parallel_training.clear()
    return TrainResult(params=params, history=history)


def train_plain(
    net: NetworkSpec,
    params: ParamStore,
    train: Dataset,
    test: Dataset,
    cfg: TrainConfig,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainResult:
    """Train on hard labels with cross-entropy."""

    def loss_fn(logits, labels, _indices):
        loss, grad = cross_entropy(softmax(logits), labels)
        return LossResult(loss, grad, loss, 0.0)

    return _fit(net, params, train, test, cfg, loss_fn, "plain", on_epoch)


def train_student_kd(
    teacher_net: NetworkSpec,
    teacher_params: ParamStore,
    student_net: NetworkSpec,
    student_params: ParamStore,
    train: Dataset,
    test: Dataset,
    cfg: TrainConfig,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainResult:
    """
    Distill a frozen teacher into the student.

    The teacher's logits are computed once up front; its parameters are
    never passed to the optimizer.
    """
    teacher_logits = predict_logits(teacher_net, teacher_params, train)
    logger.info(
        "Teacher %s logits ready for %s samples (alpha=%s T=%s)",
        teacher_net.name,
        len(train),
        cfg.alpha,
        cfg.temperature,
    )

    def loss_fn(logits, labels, indices):
        return kd_loss(logits, teacher_logits[indices], labels, cfg)

    return _fit(student_net, student_params, train, test, cfg, loss_fn, "kd", on_epoch)
