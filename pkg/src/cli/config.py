"""INI experiment configuration.

Example:

    [experiment]
    dataset = cifar10           ; mnist or cifar10
    train_size = 10000
    test_size = 2000
    teacher_spec = mini-alexnet
    resolutions = 8, 16, 32
    seeds = 0, 1, 2
    out_dir = results
    kd = on

    [teacher]
    lr = 0.01
    epochs = 20

    [student]
    variant = sclc              ; sclc, sclc-maxpool or sq
    alpha = 0.5
    temperature = 4

    [latency]
    payload_bytes = 100000
    link_rate_bits_per_s = 2.5e9
    backend_ms = 0.28

    [bench]
    kinds = spatial_conv, spectral_conv, max_pool, spectral_pool
    sides = 64, 128, 256, 512, 1024
    kernel_sizes = 3, 11
    reps = 5
"""

from __future__ import annotations

import configparser
import logging
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.bench import BENCH_KINDS, LatencyModel
from src.config import get_settings
from src.distill import TrainConfig
from src.errors import ConfigError
from src.tensor import is_power_of_two

logger = logging.getLogger(__name__)

TEACHER_DEFAULTS = {"lr": 0.01, "alpha": 1.0}
TRUE_WORDS = ("1", "true", "yes", "on")
FALSE_WORDS = ("0", "false", "no", "off")


class BenchConfig(BaseModel):
    """Layer benchmark grid."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kinds: Tuple[str, ...] = BENCH_KINDS
    sides: Tuple[int, ...] = (64, 128, 256, 512, 1024)
    kernel_sizes: Tuple[int, ...] = (3, 11)
    reps: int = Field(default=5, ge=5)
    channels: int = Field(default=1, ge=1)
    include_transforms: bool = False

    @field_validator("kinds")
    @classmethod
    def _known_kinds(cls, kinds):
        unknown = [k for k in kinds if k not in BENCH_KINDS]
        if unknown:
            raise ValueError(f"unknown bench kinds {unknown}")
        return kinds

    @field_validator("sides")
    @classmethod
    def _power_of_two_sides(cls, sides):
        if not all(is_power_of_two(s) for s in sides):
            raise ValueError(f"bench sides must be powers of two, got {sides}")
        return sides


class ExperimentConfig(BaseModel):
    """Everything one CLI command needs."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    dataset: Literal["mnist", "cifar10"] = "cifar10"
    data_dir: Optional[Path] = None
    train_size: int = Field(default=10_000, ge=1)
    test_size: int = Field(default=2_000, ge=1)
    teacher_spec: str = "mini-alexnet"
    resolutions: Tuple[int, ...] = (8, 16, 32)
    out_dir: Path = Path("results")
    seed: int = 0
    seeds: Tuple[int, ...] = (0, 1, 2)
    kd: bool = True
    variant: Literal["sclc", "sclc-maxpool", "sq"] = "sclc"
    teacher_checkpoint: Optional[Path] = None
    backend_from_teacher: bool = False
    teacher: TrainConfig = TrainConfig(**TEACHER_DEFAULTS)
    student: TrainConfig = TrainConfig()
    latency: LatencyModel = LatencyModel()
    bench: BenchConfig = BenchConfig()

    @field_validator("resolutions")
    @classmethod
    def _power_of_two_resolutions(cls, resolutions):
        if not resolutions or not all(is_power_of_two(r) for r in resolutions):
            raise ValueError(f"resolutions must be powers of two, got {resolutions}")
        return tuple(sorted(resolutions))

    @property
    def dataset_dir(self) -> Path:
        return self.data_dir or get_settings().data_dir

    @property
    def checkpoint_path(self) -> Path:
        return self.teacher_checkpoint or self.out_dir / "teacher.sclcp"

    def with_overrides(
        self,
        seed: Optional[int] = None,
        out_dir: Optional[Path] = None,
        kd: Optional[bool] = None,
    ) -> "ExperimentConfig":
        """Copy with CLI flag values applied on top of the INI values."""
        update: Dict[str, Any] = {}
        if seed is not None:
            update["seed"] = seed
            update["seeds"] = (seed,)
        if out_dir is not None:
            update["out_dir"] = Path(out_dir)
        if kd is not None:
            update["kd"] = kd
        return self.model_copy(update=update)


def parse_bool(value: str) -> bool:
    word = value.strip().lower()
    if word in TRUE_WORDS:
        return True
    if word in FALSE_WORDS:
        return False
    raise ConfigError(f"expected on/off, got '{value}'")


def _int_list(value: str) -> Tuple[int, ...]:
    return tuple(int(v) for v in value.replace(",", " ").split())


def _str_list(value: str) -> Tuple[str, ...]:
    return tuple(v for v in value.replace(",", " ").split())


_EXPERIMENT_PARSERS = {
    "train_size": int,
    "test_size": int,
    "seed": int,
    "resolutions": _int_list,
    "seeds": _int_list,
    "kd": parse_bool,
    "backend_from_teacher": parse_bool,
}
_TRAIN_PARSERS = {
    "t_squared_scaling": parse_bool,
}
_BENCH_PARSERS = {
    "kinds": _str_list,
    "sides": _int_list,
    "kernel_sizes": _int_list,
    "include_transforms": parse_bool,
}


def _section(parser: configparser.ConfigParser, name: str, converters: dict) -> Dict[str, Any]:
    if not parser.has_section(name):
        return {}
    values: Dict[str, Any] = {}
    for key, raw in parser.items(name):
        convert = converters.get(key)
        try:
            values[key] = convert(raw) if convert else raw
        except ValueError as exc:
            raise ConfigError(f"[{name}] {key} = {raw!r}: {exc}") from exc
    return values


def load_config(path) -> ExperimentConfig:
    """
    Read an INI file into an ExperimentConfig.

    Raises:
        ConfigError: Unreadable file, unknown keys or invalid values
    """
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")

    experiment = _section(parser, "experiment", _EXPERIMENT_PARSERS)
    teacher = {**TEACHER_DEFAULTS, **_section(parser, "teacher", _TRAIN_PARSERS)}
    student = _section(parser, "student", _TRAIN_PARSERS)
    if "variant" in student:
        experiment["variant"] = student.pop("variant")
    if "workers" not in teacher and "workers" not in student:
        teacher["workers"] = student["workers"] = get_settings().workers

    try:
        cfg = ExperimentConfig(
            **experiment,
            teacher=TrainConfig(**teacher),
            student=TrainConfig(**student),
            latency=LatencyModel(**_section(parser, "latency", {})),
            bench=BenchConfig(**_section(parser, "bench", _BENCH_PARSERS)),
        )
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc
    logger.info("Loaded config %s (dataset=%s, teacher=%s)", path, cfg.dataset, cfg.teacher_spec)
    return cfg
