"""Analytic latency of an optical frontend feeding an electronic dense backend."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class LatencyModel(BaseModel):
    """Per-image latency inputs."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    payload_bytes: float = Field(default=100_000, ge=0)
    link_rate_bits_per_s: float = Field(default=2.5e9, gt=0)
    backend_ms: float = Field(default=0.28, ge=0)
    optical_ms: float = Field(default=0.0, ge=0)


class LatencyBreakdown(BaseModel):
    """Per-image milliseconds; total is the sum of the three terms."""

    optical_ms: float
    transduction_ms: float
    backend_ms: float
    total_ms: float

    def to_markdown(self) -> str:
        return (
            "| term | ms/img |\n|---|---|\n"
            f"| optical | {self.optical_ms:.4f} |\n"
            f"| transduction | {self.transduction_ms:.4f} |\n"
            f"| backend | {self.backend_ms:.4f} |\n"
            f"| **total** | **{self.total_ms:.4f}** |\n"
        )


def latency_estimate(m: LatencyModel) -> LatencyBreakdown:
    """total = optical + payload_bytes * 8 / link_rate * 1000 + backend."""
    transduction = m.payload_bytes * 8.0 / m.link_rate_bits_per_s * 1000.0
    return LatencyBreakdown(
        optical_ms=m.optical_ms,
        transduction_ms=transduction,
        backend_ms=m.backend_ms,
        total_ms=m.optical_ms + transduction + m.backend_ms,
    )
