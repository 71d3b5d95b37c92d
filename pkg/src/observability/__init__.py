"""Observability: structured logging, Sentry and Prometheus text-file metrics."""

from .logging import setup_observability
from .metrics import RunMetrics

__all__ = ["RunMetrics", "setup_observability"]
