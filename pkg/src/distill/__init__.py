"""Distill module - losses, SGD and the plain / knowledge-distillation training loops."""

from .config import ALPHA_GRID, TEMPERATURE_GRID, TrainConfig
from .losses import (
    LossResult,
    ProbVector,
    cross_entropy,
    kd_loss,
    kl_div,
    soft_cross_entropy,
    softmax,
    softmax_temp,
)
from .optimizer import sgd_step
from .trainer import (
    HISTORY_COLUMNS,
    EpochRecord,
    History,
    TrainResult,
    evaluate,
    parallel_training_active,
    predict_logits,
    train_plain,
    train_student_kd,
)

__all__ = [
    "HISTORY_COLUMNS",
    "ALPHA_GRID",
    "TEMPERATURE_GRID",
    "EpochRecord",
    "History",
    "LossResult",
    "ProbVector",
    "TrainConfig",
    "TrainResult",
    "cross_entropy",
    "evaluate",
    "kd_loss",
    "kl_div",
    "parallel_training_active",
    "predict_logits",
    "sgd_step",
    "soft_cross_entropy",
    "softmax",
    "softmax_temp",
    "train_plain",
    "train_student_kd",
]
