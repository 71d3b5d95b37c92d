"""Run gauges exported as a Prometheus text file."""

import logging
from pathlib import Path

from prometheus_client import CollectorRegistry, Gauge, write_to_textfile

from src.config import get_settings

logger = logging.getLogger(__name__)


class RunMetrics:
    """Training and benchmark gauges of one CLI run."""

    def __init__(self):
        self.registry = CollectorRegistry()
        self.epoch_loss = Gauge(
            "sclc_epoch_train_loss",
            "Mean training loss of the last epoch",
            ["network"],
            registry=self.registry,
        )
        self.test_accuracy = Gauge(
            "sclc_test_accuracy",
            "Test accuracy after the last epoch",
            ["network"],
            registry=self.registry,
        )
        self.epoch_seconds = Gauge(
            "sclc_epoch_wall_seconds",
            "Wall time of the last epoch",
            ["network"],
            registry=self.registry,
        )
        self.layer_median_ms = Gauge(
            "sclc_bench_median_ms",
            "Median forward time of a benchmarked layer",
            ["kind", "side", "kernel"],
            registry=self.registry,
        )

    def observe_epoch(self, network: str, record) -> None:
        self.epoch_loss.labels(network).set(record.train_loss)
        self.test_accuracy.labels(network).set(record.test_accuracy)
        self.epoch_seconds.labels(network).set(record.wall_ms / 1000.0)

    def observe_timings(self, table) -> None:
        for row in table.rows:
            if not row.skipped:
                self.layer_median_ms.labels(row.kind, str(row.side), str(row.kernel)).set(
                    row.median_ms
                )

    def write(self, out_dir: Path) -> None:
        """Write metrics.prom into out_dir when ENABLE_METRICS is set."""
        if not get_settings().enable_metrics:
            return
        path = Path(out_dir) / "metrics.prom"
        write_to_textfile(str(path), self.registry)
        logger.info("Wrote metrics to %s", path)
