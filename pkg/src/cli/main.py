"""Command-line entry point."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from src.errors import SCLCError
from src.observability import setup_observability
from src.resilience import FailureGuard

from .config import ExperimentConfig, load_config, parse_bool
from .runner import Command, run

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sclc",
        description="Train and benchmark spectral linear-counterpart CNNs with distillation",
    )
    parser.add_argument("--config", type=Path, help="INI experiment config")
    parser.add_argument(
        "--cmd",
        required=True,
        choices=[c.value for c in Command],
        help="experiment to run",
    )
    parser.add_argument("--kd", choices=("on", "off"), help="distill from the teacher")
    parser.add_argument("--seed", type=int, help="seed (replaces the [experiment] seeds)")
    parser.add_argument("--out", type=Path, help="output directory")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    run_id = setup_observability(args.cmd)
    logger.info("Starting %s (run %s)", args.cmd, run_id)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = cfg.with_overrides(
            seed=args.seed,
            out_dir=args.out,
            kd=parse_bool(args.kd) if args.kd else None,
        )
        return run(Command(args.cmd), cfg)
    except SCLCError as exc:
        logger.error("%s failed: %s", args.cmd, exc)
        recovery = FailureGuard().recovery_for(exc)
        if recovery is not None:
            logger.error("Recovery (%s): %s", recovery.action, recovery.description)
        return 1


if __name__ == "__main__":
    sys.exit(main())
