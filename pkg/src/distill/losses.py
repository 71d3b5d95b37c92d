"""Temperature softmax, classification losses and the distillation loss.

All functions accept a single logit vector (n,) or a batch (S, n). Batch
losses are means over samples and logit gradients carry the matching 1/S.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.errors import ConfigError, NonFiniteError, ShapeMismatchError

from .config import TrainConfig


@dataclass(frozen=True)
class ProbVector:
    """Rows of class probabilities."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim not in (1, 2) or values.shape[-1] < 1:
            raise ShapeMismatchError(f"probabilities must be (n,) or (S, n), got {values.shape}")
        if ((values < 0) | (values > 1)).any():
            raise ValueError("probabilities must lie in [0, 1]")
        if not np.allclose(values.sum(axis=-1), 1.0, rtol=0, atol=1e-9):
            raise ValueError("probabilities must sum to 1")
        object.__setattr__(self, "values", values)


def _check_logits(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if not np.isfinite(z).all():
        raise NonFiniteError("logits contain NaN or infinity")
    return z


def softmax(z) -> ProbVector:
    """exp(z_i) / sum_j exp(z_j), stabilized by subtracting the max."""
    z = _check_logits(z)
    shifted = np.exp(z - z.max(axis=-1, keepdims=True))
    return ProbVector(shifted / shifted.sum(axis=-1, keepdims=True))


def softmax_temp(z, T: float) -> ProbVector:
    """Softmax of z / T."""
    if not T > 0:
        raise ConfigError(f"temperature must be positive, got {T}")
    z = _check_logits(z)
    return softmax(z if T == 1 else z / T)


def _batch_size(values: np.ndarray) -> int:
    return values.shape[0] if values.ndim == 2 else 1


def cross_entropy(p: ProbVector, label) -> tuple[float, np.ndarray]:
    """
    Mean -log p[label] and its gradient w.r.t. the logits behind p.

    Args:
        p: Probabilities from softmax
        label: Class index, or one index per row for a batch

    Returns:
        (loss, p - onehot(label)) with the gradient divided by the batch size
    """
    values = p.values
    labels = np.atleast_1d(np.asarray(label, dtype=np.int64))
    rows = np.atleast_2d(values)
    classes = rows.shape[1]
    if labels.shape[0] != rows.shape[0]:
        raise ShapeMismatchError(f"{labels.shape[0]} labels for {rows.shape[0]} rows")
    if ((labels < 0) | (labels >= classes)).any():
        raise ValueError(f"labels must be in [0, {classes})")

    picked = rows[np.arange(rows.shape[0]), labels]
    with np.errstate(divide="ignore"):
        loss = float(-np.log(picked).mean())
    grad = rows.copy()
    grad[np.arange(rows.shape[0]), labels] -= 1.0
    grad /= rows.shape[0]
    return loss, grad.reshape(values.shape)


def kl_div(p: ProbVector, q: ProbVector) -> tuple[float, np.ndarray]:
    """
    Mean KL(p || q) and its gradient w.r.t. the logits behind q.

    Terms with p_i = 0 contribute zero.
    """
    if p.values.shape != q.values.shape:
        raise ShapeMismatchError(f"cannot compare {p.values.shape} with {q.values.shape}")
    pv, qv = p.values, q.values
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pv > 0, pv * (np.log(pv) - np.log(qv)), 0.0)
    n = _batch_size(pv)
    loss = float(terms.sum() / n)
    return max(loss, 0.0), (qv - pv) / n


def soft_cross_entropy(p: ProbVector, q: ProbVector) -> tuple[float, np.ndarray]:
    """Mean -sum_i p_i log q_i and its gradient w.r.t. the logits behind q."""
    if p.values.shape != q.values.shape:
        raise ShapeMismatchError(f"cannot compare {p.values.shape} with {q.values.shape}")
    pv, qv = p.values, q.values
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pv > 0, -pv * np.log(qv), 0.0)
    n = _batch_size(pv)
    return float(terms.sum() / n), (qv - pv) / n


@dataclass(frozen=True)
class LossResult:
    """Total loss, its logit gradient and the two weighted-sum components."""

    loss: float
    logit_grad: np.ndarray
    student_term: float
    temp_term: float


def kd_loss(student_logits, teacher_logits, label, cfg: TrainConfig) -> LossResult:
    """
    alpha * CE(label, student) + (1 - alpha) * soft(teacher_T, student_T).

    The teacher logits are treated as constants. With cfg.t_squared_scaling
    the soft term is multiplied by T^2.
    """
    alpha, T = cfg.alpha, cfg.temperature
    student_term, hard_grad = cross_entropy(softmax(student_logits), label)
    if alpha == 1.0:
        return LossResult(student_term, hard_grad, student_term, 0.0)

    soft_fn = kl_div if cfg.soft_loss == "kl" else soft_cross_entropy
    temp_term, soft_grad = soft_fn(
        softmax_temp(np.asarray(teacher_logits), T), softmax_temp(student_logits, T)
    )
    scale = T * T if cfg.t_squared_scaling else 1.0
    loss = alpha * student_term + (1.0 - alpha) * scale * temp_term
    grad = alpha * hard_grad + (1.0 - alpha) * scale * soft_grad / T
    return LossResult(loss, grad, student_term, temp_term)
