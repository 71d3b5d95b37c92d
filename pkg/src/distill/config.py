"""Training hyperparameters."""

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

# Grid of the gridsearch command.
ALPHA_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
TEMPERATURE_GRID = (1.0, 2.0, 4.0, 8.0, 16.0)


class TrainConfig(BaseModel):
    """SGD and distillation settings; defaults are the student settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(default=0.5, ge=0.0, le=1.0)
    temperature: float = Field(default=4.0, gt=0.0)
    lr: float = Field(default=1e-4, ge=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    weight_decay: float = Field(default=5e-4, ge=0.0)
    batch_size: int = Field(default=16, ge=1)
    epochs: int = Field(default=20, ge=0)
    seed: int = 0
    t_squared_scaling: bool = False
    soft_loss: Literal["kl", "cross_entropy"] = "kl"
    workers: int = Field(default=1, ge=1)
