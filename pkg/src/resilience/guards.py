"""Failure classification and the recovery each experiment command applies."""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

from src.errors import (
    EmptyDatasetError,
    MissingCheckpointError,
    NonFiniteError,
)


class FailureMode(Enum):
    """Types of failures an experiment run can hit."""

    NON_FINITE_LOSS = "non_finite_loss"
    OUT_OF_MEMORY = "out_of_memory"
    MISSING_CHECKPOINT = "missing_checkpoint"
    EMPTY_DATASET = "empty_dataset"


@dataclass
class RecoveryStrategy:
    """What the runner does about a failure."""

    failure_mode: FailureMode
    action: str
    description: str


@dataclass(frozen=True)
class DivergedRun:
    """A training run that stopped on a non-finite value."""

    network: str
    reason: str
    status: str = "diverged"


class FailureGuard:
    """Classifies failures and maps them to recoveries."""

    def __init__(self):
        self.strategies = {
            FailureMode.NON_FINITE_LOSS: [
                RecoveryStrategy(
                    FailureMode.NON_FINITE_LOSS,
                    "record_diverged",
                    "Report the run as diverged instead of failing the command",
                ),
            ],
            FailureMode.OUT_OF_MEMORY: [
                RecoveryStrategy(
                    FailureMode.OUT_OF_MEMORY,
                    "skip_row",
                    "Mark the benchmark row skipped and continue with the next size",
                ),
            ],
            FailureMode.MISSING_CHECKPOINT: [
                RecoveryStrategy(
                    FailureMode.MISSING_CHECKPOINT,
                    "train_teacher_first",
                    "Run train-teacher (or set teacher_checkpoint) before distilling",
                ),
            ],
            FailureMode.EMPTY_DATASET: [
                RecoveryStrategy(
                    FailureMode.EMPTY_DATASET,
                    "abort",
                    "Check DATA_DIR and the subset sizes in [experiment]",
                ),
            ],
        }

    def classify(self, exc: BaseException) -> Optional[FailureMode]:
        """Failure mode of an exception, None for unrecognized ones."""
        if isinstance(exc, NonFiniteError):
            return FailureMode.NON_FINITE_LOSS
        if isinstance(exc, MemoryError):
            return FailureMode.OUT_OF_MEMORY
        if isinstance(exc, MissingCheckpointError):
            return FailureMode.MISSING_CHECKPOINT
        if isinstance(exc, EmptyDatasetError):
            return FailureMode.EMPTY_DATASET
        return None

    def get_recovery_strategies(self, failure_mode: FailureMode) -> list[RecoveryStrategy]:
        return self.strategies.get(failure_mode, [])

    def recovery_for(self, exc: BaseException) -> Optional[RecoveryStrategy]:
        """First recovery for an exception, None when it is not a known failure."""
        mode = self.classify(exc)
        if mode is None:
            return None
        strategies = self.get_recovery_strategies(mode)
        return strategies[0] if strategies else None

    def handle_divergence(self, network: str, exc: NonFiniteError) -> DivergedRun:
        return DivergedRun(network=network, reason=str(exc))

    def require_checkpoint(self, path: Path) -> Path:
        """
        Check that a teacher checkpoint exists.

        Raises:
            MissingCheckpointError: with the command that produces it
        """
        path = Path(path)
        if not path.exists():
            hint = self.strategies[FailureMode.MISSING_CHECKPOINT][0].description
            raise MissingCheckpointError(f"teacher checkpoint {path} not found. {hint}")
        return path
