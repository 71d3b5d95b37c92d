"""Bench module - layer timing, scaling fits and the latency model."""

from .latency import LatencyBreakdown, LatencyModel, latency_estimate
from .timing import (
    BENCH_KINDS,
    TimingRow,
    TimingTable,
    check_expectations,
    crossover_size,
    fit_loglog_slope,
    time_layer,
    time_network,
)

__all__ = [
    "BENCH_KINDS",
    "LatencyBreakdown",
    "LatencyModel",
    "TimingRow",
    "TimingTable",
    "check_expectations",
    "crossover_size",
    "fit_loglog_slope",
    "latency_estimate",
    "time_layer",
    "time_network",
]
