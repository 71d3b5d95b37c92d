"""CLI module - experiment config, command runner and reports."""

from .config import BenchConfig, ExperimentConfig, load_config
from .runner import Command, ExperimentRunner, run, student_spec

__all__ = [
    "BenchConfig",
    "Command",
    "ExperimentConfig",
    "ExperimentRunner",
    "load_config",
    "run",
    "student_spec",
]
