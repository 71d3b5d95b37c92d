"""Layer and network runtime measurement, log-log scaling fits and crossover detection."""

from __future__ import annotations

import csv
import io
import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from time import perf_counter
from typing import Callable, Iterable, Iterator, List, Optional, Sequence

import numpy as np
from scipy.stats import median_abs_deviation

from src.distill import parallel_training_active
from src.errors import BenchmarkError, InsufficientDataError, InvalidShapeError
from src.layers import (
    SpectralConvLayer,
    SpectralPoolLayer,
    max_pool_forward,
    spatial_conv_forward,
    spectral_conv_forward,
    spectral_pool_forward,
)
from src.network import NetworkSpec, ParamStore, build_runtime, forward
from src.resilience import FailureGuard
from src.tensor import RealTensor4, fft2, ifft2, is_power_of_two, real_part

logger = logging.getLogger(__name__)

BENCH_KINDS = ("spatial_conv", "spectral_conv", "max_pool", "spectral_pool")
TIMING_COLUMNS = ("kind", "side", "kernel", "reps", "median_ms", "mad_ms", "status")
MIN_REPS = 5
WARMUP = 3

_guard = FailureGuard()


@dataclass(frozen=True)
class TimingRow:
    """One (kind, side) measurement; median_ms and mad_ms are None when skipped."""

    kind: str
    side: int
    kernel: int
    reps: int
    median_ms: Optional[float]
    mad_ms: Optional[float]
    status: str = "ok"

    @property
    def skipped(self) -> bool:
        return self.status != "ok"


@dataclass
class TimingTable:
    """Timing rows in measurement order."""

    rows: List[TimingRow] = field(default_factory=list)

    def for_kind(self, kind: str, measured_only: bool = True) -> List[TimingRow]:
        return [r for r in self.rows if r.kind == kind and not (measured_only and r.skipped)]

    def extend(self, other: "TimingTable") -> "TimingTable":
        return TimingTable(self.rows + other.rows)

    def to_csv(self, include_timings: bool = True) -> str:
        columns = [
            c for c in TIMING_COLUMNS if include_timings or c not in ("median_ms", "mad_ms")
        ]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in self.rows:
            values = []
            for c in columns:
                v = getattr(row, c)
                values.append("" if v is None else (f"{v:.6f}" if isinstance(v, float) else v))
            writer.writerow(values)
        return buf.getvalue()

    def summary_markdown(self) -> str:
        """Per-kind medians, fitted slopes and the conv crossover."""
        lines = ["# Layer timing", ""]
        lines += ["| kind | side | kernel | median ms | MAD ms |", "|---|---|---|---|---|"]
        for r in self.rows:
            if r.skipped:
                lines.append(f"| {r.kind} | {r.side} | {r.kernel} | {r.status} | |")
            else:
                lines.append(
                    f"| {r.kind} | {r.side} | {r.kernel} | {r.median_ms:.4f} | {r.mad_ms:.4f} |"
                )
        lines += ["", "## Log-log slopes vs H*W", ""]
        for kind in dict.fromkeys(r.kind for r in self.rows):
            try:
                lines.append(f"- {kind}: {fit_loglog_slope(self, kind):.3f}")
            except InsufficientDataError:
                lines.append(f"- {kind}: not enough sizes")
        spatial, spectral = self.for_kind("spatial_conv"), self.for_kind("spectral_conv")
        if spatial and spectral:
            try:
                cross = crossover_size(
                    TimingTable(spatial), TimingTable(spectral)
                )
                lines += ["", f"Crossover side: {cross if cross is not None else 'none'}"]
            except InvalidShapeError as exc:
                lines += ["", f"Crossover side: {exc}"]
        return "\n".join(lines) + "\n"


@contextmanager
def _pin_single_core() -> Iterator[None]:
    """Pin the process to its first allowed core, restoring the original set on exit."""
    original = None
    if hasattr(os, "sched_setaffinity"):
        try:
            original = os.sched_getaffinity(0)
            os.sched_setaffinity(0, {min(original)})
        except OSError as exc:
            logger.warning("Could not pin benchmark to one core: %s", exc)
            original = None
    try:
        yield
    finally:
        if original is not None:
            try:
                os.sched_setaffinity(0, original)
            except OSError as exc:
                logger.warning("Could not restore core affinity %s: %s", sorted(original), exc)


def _measure(fn: Callable[[], object], reps: int, warmup: int) -> tuple[float, float]:
    for _ in range(warmup):
        fn()
    samples = np.empty(reps)
    for i in range(reps):
        start = perf_counter()
        fn()
        samples[i] = (perf_counter() - start) * 1000.0
    return float(np.median(samples)), float(median_abs_deviation(samples))


def _layer_call(
    kind: str,
    side: int,
    kernel_size: int,
    rng: np.random.Generator,
    include_transforms: bool,
    channels: int,
) -> Callable[[], object]:
    x = RealTensor4(rng.standard_normal((1, channels, side, side)))
    if kind == "spatial_conv":
        k = RealTensor4(rng.standard_normal((channels, channels, kernel_size, kernel_size)))
        return lambda: spatial_conv_forward(k, x)
    if kind == "spectral_conv":
        k = RealTensor4(rng.standard_normal((channels, channels, kernel_size, kernel_size)))
        X = fft2(x)

        def spectral():
            # fresh layer so the kernel FFT is part of every run
            layer = SpectralConvLayer(kernels=k, input_hw=(side, side))
            if include_transforms:
                return real_part(ifft2(spectral_conv_forward(layer, fft2(x))))
            return spectral_conv_forward(layer, X)

        return spectral
    if kind == "max_pool":
        return lambda: max_pool_forward(x, 2)
    if kind == "spectral_pool":
        pool = SpectralPoolLayer((side // 2, side // 2))
        X = fft2(x)
        if include_transforms:
            return lambda: real_part(ifft2(spectral_pool_forward(pool, fft2(x))))
        return lambda: spectral_pool_forward(pool, X)
    raise ValueError(f"unknown bench kind '{kind}', expected one of {BENCH_KINDS}")


def time_layer(
    kind: str,
    side_lengths: Iterable[int],
    kernel_size: int = 3,
    reps: int = MIN_REPS,
    warmup: int = WARMUP,
    seed: int = 0,
    include_transforms: bool = False,
    channels: int = 1,
) -> TimingTable:
    """
    Forward-pass wall-clock medians of one layer kind over several sizes.

    Args:
        kind: spatial_conv, spectral_conv, max_pool or spectral_pool
        side_lengths: Square input sides, powers of two
        kernel_size: Conv kernel side (recorded for pool kinds too)
        reps: Measured runs per size, at least 5
        warmup: Discarded runs per size
        seed: Seed of the random inputs
        include_transforms: Also time the input fft2 and output ifft2 of spectral kinds
        channels: Input and output channel count

    Returns:
        TimingTable with one row per side; sizes that run out of memory are
        marked skipped
    """
    if parallel_training_active():
        raise BenchmarkError("refusing to benchmark while parallel training is running")
    if kind not in BENCH_KINDS:
        raise ValueError(f"unknown bench kind '{kind}', expected one of {BENCH_KINDS}")
    if reps < MIN_REPS:
        raise BenchmarkError(f"reps must be at least {MIN_REPS}, got {reps}")
    sides = list(side_lengths)
    for side in sides:
        if not is_power_of_two(side):
            raise InvalidShapeError(f"bench side must be a power of two, got {side}")
    rng = np.random.default_rng(seed)
    table = TimingTable()
    with _pin_single_core():
        for side in sides:
            try:
                fn = _layer_call(kind, side, kernel_size, rng, include_transforms, channels)
                median, mad = _measure(fn, reps, warmup)
            except MemoryError as exc:
                recovery = _guard.recovery_for(exc)
                logger.warning(
                    "%s at side %s ran out of memory: %s", kind, side, recovery.description
                )
                table.rows.append(TimingRow(kind, side, kernel_size, reps, None, None, "skipped"))
                continue
            logger.info(
                "%s side=%s k=%s: %.4f ms (MAD %.4f)", kind, side, kernel_size, median, mad
            )
            table.rows.append(TimingRow(kind, side, kernel_size, reps, median, mad))
    return table


def fit_loglog_slope(table: TimingTable, kind: str) -> float:
    """Least-squares slope of log(median_ms) against log(H*W)."""
    rows = table.for_kind(kind)
    if len(rows) < 4:
        raise InsufficientDataError(f"need at least 4 measured rows for {kind}, got {len(rows)}")
    x = np.log(np.array([r.side * r.side for r in rows], dtype=np.float64))
    y = np.log(np.array([r.median_ms for r in rows], dtype=np.float64))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def crossover_size(spatial: TimingTable, spectral: TimingTable) -> Optional[int]:
    """Smallest shared side where the spectral median beats the spatial one."""
    spatial_by_side = {r.side: r for r in spatial.rows if not r.skipped}
    spectral_by_side = {r.side: r for r in spectral.rows if not r.skipped}
    shared = sorted(set(spatial_by_side) & set(spectral_by_side))
    if not shared:
        raise InvalidShapeError("spatial and spectral tables share no side lengths")
    for side in shared:
        if spectral_by_side[side].median_ms < spatial_by_side[side].median_ms:
            return side
    return None


def time_network(
    net: NetworkSpec,
    params: ParamStore,
    reps: int = MIN_REPS,
    batch_size: int = 16,
    seed: int = 0,
    warmup: int = WARMUP,
) -> tuple[float, float]:
    """Median and MAD of the forward time per image of a whole network, in ms."""
    if parallel_training_active():
        raise BenchmarkError("refusing to benchmark while parallel training is running")
    if reps < MIN_REPS:
        raise BenchmarkError(f"reps must be at least {MIN_REPS}, got {reps}")
    shape = net.input_shape
    rng = np.random.default_rng(seed)
    batch = RealTensor4(rng.uniform(0.0, 1.0, (batch_size, shape.c, shape.h, shape.w)))
    runtime = build_runtime(net, params)
    with _pin_single_core():
        median, mad = _measure(lambda: forward(net, params, batch, runtime=runtime), reps, warmup)
    return median / batch_size, mad / batch_size


def _monotone(rows: Sequence[TimingRow]) -> bool:
    medians = [r.median_ms for r in sorted(rows, key=lambda r: r.side)]
    inversions = [i for i in range(1, len(medians)) if medians[i] < medians[i - 1]]
    # one inversion between the two smallest sizes is noise
    return not inversions or inversions == [1]


def check_expectations(table: TimingTable) -> List[str]:
    """
    Soft checks of hardware-dependent expectations.

    Returns the failed expectations, each also logged as a warning.
    """
    failed: List[str] = []
    for kind in ("spatial_conv", "spectral_conv"):
        rows = table.for_kind(kind)
        if len(rows) > 1 and not _monotone(rows):
            failed.append(f"{kind} medians are not non-decreasing in side length")

    spatial, spectral = table.for_kind("spatial_conv"), table.for_kind("spectral_conv")
    try:
        if fit_loglog_slope(table, "spectral_conv") > fit_loglog_slope(table, "spatial_conv"):
            failed.append("spectral_conv slope exceeds spatial_conv slope")
    except InsufficientDataError:
        pass
    if spatial and spectral:
        try:
            if crossover_size(TimingTable(spatial), TimingTable(spectral)) is None:
                failed.append("spectral_conv never beats spatial_conv")
        except InvalidShapeError:
            pass

    for message in failed:
        logger.warning("Benchmark expectation not met: %s", message)
    return failed
