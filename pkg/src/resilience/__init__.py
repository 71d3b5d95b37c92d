"""Resilience module - failure classification and recovery."""

from .guards import DivergedRun, FailureGuard, FailureMode, RecoveryStrategy

__all__ = ["DivergedRun", "FailureGuard", "FailureMode", "RecoveryStrategy"]
