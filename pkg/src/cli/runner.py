"""Command dispatch: every experiment the CLI can run."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.stats import spearmanr

from src.bench import (
    TimingTable,
    check_expectations,
    crossover_size,
    fit_loglog_slope,
    latency_estimate,
    time_layer,
    time_network,
)
from src.datasets import DATASET_LAYOUT, Dataset, load_cifar10, load_mnist, resample
from src.distill import (
    ALPHA_GRID,
    HISTORY_COLUMNS,
    TEMPERATURE_GRID,
    TrainConfig,
    TrainResult,
    evaluate,
    train_plain,
    train_student_kd,
)
from src.errors import ConfigError, InsufficientDataError, InvalidShapeError, NonFiniteError
from src.network import (
    NetworkSpec,
    ParamStore,
    backend_only,
    build_teacher,
    copy_backend,
    init_params,
    linear_counterpart,
    load_params,
    save_params,
    square_variant,
)
from src.observability import RunMetrics
from src.resilience import DivergedRun, FailureGuard
from src.tensor import Shape4

from .config import ExperimentConfig
from .reports import ReportWriter, csv_text, markdown_table

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = (
    "network",
    "variant",
    "kd",
    "seed",
    "initial_accuracy",
    "final_accuracy",
    "status",
)
RESOLUTION_COLUMNS = ("seed", "side", "network", "accuracy", "ms_per_image")
NETWORK_TIMING_COLUMNS = ("network", "side", "ms_per_image", "mad_ms_per_image")
GRID_COLUMNS = ("alpha", "temperature", "final_accuracy", "status")


class Command(Enum):
    """Commands accepted by --cmd."""

    TRAIN_TEACHER = "train-teacher"
    TRAIN_STUDENT = "train-student"
    ABLATE = "ablate"
    SWEEP_RESOLUTION = "sweep-resolution"
    BENCH = "bench"
    LATENCY = "latency"
    GRIDSEARCH = "gridsearch"


@dataclass
class StudentRun:
    """Outcome of one student training run."""

    net: NetworkSpec
    variant: str
    kd: bool
    seed: int
    initial_accuracy: float
    result: Optional[TrainResult] = None
    diverged: Optional[DivergedRun] = None

    @property
    def final_accuracy(self) -> Optional[float]:
        return None if self.result is None else self.result.history.final_accuracy

    @property
    def status(self) -> str:
        return self.diverged.status if self.diverged else "ok"

    def summary_row(self) -> list:
        return [
            self.net.name,
            self.variant,
            "on" if self.kd else "off",
            self.seed,
            self.initial_accuracy,
            self.final_accuracy,
            self.status,
        ]


def student_spec(teacher: NetworkSpec, variant: str) -> NetworkSpec:
    """Student architecture of a named variant."""
    if variant == "sclc":
        return linear_counterpart(teacher, pooling="spectral")
    if variant == "sclc-maxpool":
        return linear_counterpart(teacher, pooling="max")
    if variant == "sq":
        return square_variant(teacher)
    raise ConfigError(f"unknown student variant '{variant}'")


def history_slug(label: str) -> str:
    """File-name form of an ablation row label: 'frontend+backend+kd' -> 'frontend_backend_kd'."""
    return "".join(ch if ch.isalnum() else "_" for ch in label)


class ExperimentRunner:
    """Runs one command against an ExperimentConfig."""

    def __init__(
        self,
        cfg: ExperimentConfig,
        guard: Optional[FailureGuard] = None,
        metrics: Optional[RunMetrics] = None,
    ):
        self.cfg = cfg
        self.guard = guard or FailureGuard()
        self.metrics = metrics or RunMetrics()
        self._data: Optional[Tuple[Dataset, Dataset]] = None

    def run(self, command: Command) -> int:
        """Execute a command and write its artifacts; returns the exit status."""
        report = ReportWriter(self.cfg.out_dir, command.value)
        handlers = {
            Command.TRAIN_TEACHER: self.train_teacher,
            Command.TRAIN_STUDENT: self.train_student,
            Command.ABLATE: self.ablate,
            Command.SWEEP_RESOLUTION: self.sweep_resolution,
            Command.BENCH: self.bench,
            Command.LATENCY: self.latency,
            Command.GRIDSEARCH: self.gridsearch,
        }
        logger.info("Running %s into %s", command.value, self.cfg.out_dir)
        handlers[command](report)
        self.metrics.write(self.cfg.out_dir)
        report.write_manifest()
        return 0

    # data and networks

    def load_data(self) -> Tuple[Dataset, Dataset]:
        """Train and test splits at native resolution, loaded once."""
        if self._data is None:
            cfg = self.cfg
            root = Path(cfg.dataset_dir)
            if (root / cfg.dataset).is_dir():
                root = root / cfg.dataset
            loader = load_mnist if cfg.dataset == "mnist" else load_cifar10
            try:
                train = loader(root, "train", limit=cfg.train_size)
                test = loader(root, "test", limit=cfg.test_size)
            except FileNotFoundError as exc:
                raise ConfigError(f"{cfg.dataset} files not found under {root}: {exc}") from exc
            self._data = (train, test)
        return self._data

    def teacher_spec(self, train: Dataset) -> NetworkSpec:
        shape = train.images.shape
        return build_teacher(
            self.cfg.teacher_spec, Shape4(1, shape.c, shape.h, shape.w), train.class_count
        )

    def load_teacher(self, teacher: NetworkSpec) -> ParamStore:
        path = self.guard.require_checkpoint(self.cfg.checkpoint_path)
        return load_params(path, teacher)

    def fit_teacher(
        self, teacher: NetworkSpec, train: Dataset, test: Dataset, seed: int
    ) -> TrainResult:
        cfg = self.cfg.teacher.model_copy(update={"seed": seed})
        return train_plain(
            teacher,
            init_params(teacher, seed),
            train,
            test,
            cfg,
            on_epoch=lambda r: self.metrics.observe_epoch(teacher.name, r),
        )

    def fit_student(
        self,
        teacher: NetworkSpec,
        teacher_params: Optional[ParamStore],
        net: NetworkSpec,
        train: Dataset,
        test: Dataset,
        seed: int,
        kd: bool,
        variant: str,
        student_cfg: Optional[TrainConfig] = None,
    ) -> StudentRun:
        """Train one student; non-finite values are recorded as divergence."""
        cfg = (student_cfg or self.cfg.student).model_copy(update={"seed": seed})
        params = init_params(net, seed)
        if (
            self.cfg.backend_from_teacher
            and teacher_params is not None
            and variant != "backend-only"
        ):
            params = copy_backend(params, teacher_params, net)
        run = StudentRun(net, variant, kd, seed, initial_accuracy=float("nan"))
        on_epoch = lambda r: self.metrics.observe_epoch(net.name, r)  # noqa: E731
        try:
            run.initial_accuracy = evaluate(net, params, test)
            if kd:
                run.result = train_student_kd(
                    teacher, teacher_params, net, params, train, test, cfg, on_epoch
                )
            else:
                run.result = train_plain(net, params, train, test, cfg, on_epoch)
        except NonFiniteError as exc:
            run.diverged = self.guard.handle_divergence(net.name, exc)
            logger.warning("%s diverged: %s", net.name, exc)
        return run

    # commands

    def train_teacher(self, report: ReportWriter) -> None:
        train, test = self.load_data()
        teacher = self.teacher_spec(train)
        result = self.fit_teacher(teacher, train, test, self.cfg.seed)

        path = self.cfg.checkpoint_path
        path.parent.mkdir(parents=True, exist_ok=True)
        save_params(result.params, path)
        if path.parent.resolve() == report.out_dir.resolve():
            report.add_binary(path.name)
        logger.info("Saved teacher %s to %s", teacher.name, path)

        report.write_csv("teacher_history.csv", result.history.to_csv())
        report.write_markdown(
            "teacher.md",
            f"# Teacher {teacher.name}\n\n"
            f"Initial test accuracy: {result.history.initial_test_accuracy:.4f}\n\n"
            f"Final test accuracy: {result.history.final_accuracy:.4f}\n\n"
            f"Checkpoint: {path}\n",
        )

    def train_student(self, report: ReportWriter) -> None:
        train, test = self.load_data()
        teacher = self.teacher_spec(train)
        teacher_params = self.load_teacher(teacher) if self.cfg.kd else None
        net = student_spec(teacher, self.cfg.variant)
        run = self.fit_student(
            teacher, teacher_params, net, train, test, self.cfg.seed, self.cfg.kd, self.cfg.variant
        )

        report.write_csv("student_summary.csv", SUMMARY_COLUMNS, [run.summary_row()])
        if run.result is not None:
            report.write_csv("student_history.csv", run.result.history.to_csv())
            save_params(run.result.params, report.out_dir / "student.sclcp")
            report.add_binary("student.sclcp")
        else:
            report.write_csv("student_history.csv", HISTORY_COLUMNS, [])

        rows = [run.summary_row()]
        if teacher_params is not None:
            rows.insert(
                0,
                [
                    teacher.name,
                    "teacher",
                    "-",
                    self.cfg.seed,
                    None,
                    evaluate(teacher, teacher_params, test),
                    "ok",
                ],
            )
        report.write_markdown(
            "student.md", f"# Student {net.name}\n\n" + markdown_table(SUMMARY_COLUMNS, rows)
        )

    def ablate(self, report: ReportWriter) -> None:
        """Backend-only, frontend+backend (+KD) and pooling-variant rows with their histories."""
        train, test = self.load_data()
        teacher = self.teacher_spec(train)
        teacher_params = self.load_teacher(teacher)
        kd = self.cfg.kd
        rows_spec = [
            ("backend-only", "backend-only", False),
            ("frontend+backend", "sclc", False),
            ("frontend+backend+kd", "sclc", True),
            ("max-pool student", "sclc-maxpool", kd),
            ("spectral-pool student", "sclc", kd),
        ]
        header = ("row",) + SUMMARY_COLUMNS
        rows: List[list] = []
        finals: Dict[str, List[float]] = {}
        for seed in self.cfg.seeds:
            cache: Dict[Tuple[str, bool], StudentRun] = {}
            for label, variant, use_kd in rows_spec:
                key = (variant, use_kd)
                if key not in cache:
                    if variant == "backend-only":
                        net = backend_only(teacher.input_shape, teacher.class_count)
                    else:
                        net = student_spec(teacher, variant)
                    cache[key] = self.fit_student(
                        teacher, teacher_params, net, train, test, seed, use_kd, variant
                    )
                run = cache[key]
                rows.append([label] + run.summary_row())
                report.write_csv(
                    f"ablation_{history_slug(label)}_seed{seed}.csv",
                    run.result.history.to_csv() if run.result else csv_text(HISTORY_COLUMNS, []),
                )
                if run.final_accuracy is not None:
                    finals.setdefault(label, []).append(run.final_accuracy)

        report.write_csv("ablation.csv", header, rows)
        means = [
            (
                label,
                float(np.mean(finals[label])) if label in finals else None,
                len(finals.get(label, [])),
            )
            for label, _, _ in rows_spec
        ]
        report.write_markdown(
            "ablation.md",
            "# Ablation\n\n" + markdown_table(("row", "mean final accuracy", "seeds"), means),
        )

    def sweep_resolution(self, report: ReportWriter) -> None:
        """Teacher and student accuracy and forward time per input side."""
        train, test = self.load_data()
        reps = self.cfg.bench.reps
        rows: List[list] = []
        accuracies: Dict[Tuple[int, str], List[Tuple[int, float]]] = {}
        for seed in self.cfg.seeds:
            for side in self.cfg.resolutions:
                train_r, test_r = resample(train, side), resample(test, side)
                teacher = self.teacher_spec(train_r)
                fitted = self.fit_teacher(teacher, train_r, test_r, seed)
                net = student_spec(teacher, "sclc")
                run = self.fit_student(
                    teacher, fitted.params, net, train_r, test_r, seed, self.cfg.kd, "sclc"
                )
                for role, spec, result in (
                    ("teacher", teacher, fitted),
                    ("student", net, run.result),
                ):
                    if result is None:
                        rows.append([seed, side, role, None, None])
                        continue
                    ms, _ = time_network(spec, result.params, reps=reps, seed=seed)
                    accuracy = result.history.final_accuracy
                    rows.append([seed, side, role, accuracy, ms])
                    accuracies.setdefault((seed, role), []).append((side, accuracy))

        report.write_csv("resolution.csv", RESOLUTION_COLUMNS, rows)
        correlations = []
        for (seed, role), pairs in sorted(accuracies.items()):
            if len(pairs) < 2:
                rho = float("nan")
            else:
                sides, values = zip(*pairs)
                rho, _ = spearmanr(sides, values)
            correlations.append([seed, role, float(rho)])
            logger.info("Spearman(side, accuracy) for %s seed %s: %.3f", role, seed, rho)
        report.write_csv("resolution_spearman.csv", ("seed", "network", "spearman"), correlations)
        report.write_markdown(
            "resolution.md",
            "# Resolution sweep\n\n"
            + markdown_table(("seed", "side", "network", "accuracy", "ms/img"), rows)
            + "\n"
            + markdown_table(("seed", "network", "spearman"), correlations),
        )

    def bench(self, report: ReportWriter) -> None:
        """Per-layer timings for every kernel size and teacher vs SCLC forward time."""
        bench = self.cfg.bench
        pool_kinds = [k for k in bench.kinds if k in ("max_pool", "spectral_pool")]
        conv_kinds = [k for k in bench.kinds if k not in pool_kinds]

        pools = TimingTable()
        for kind in pool_kinds:
            pools = pools.extend(
                time_layer(
                    kind,
                    bench.sides,
                    bench.kernel_sizes[0],
                    bench.reps,
                    seed=self.cfg.seed,
                    include_transforms=bench.include_transforms,
                    channels=bench.channels,
                )
            )
        table = pools
        sections = []
        fits: List[list] = []
        for kernel in bench.kernel_sizes:
            convs = TimingTable()
            for kind in conv_kinds:
                convs = convs.extend(
                    time_layer(
                        kind,
                        bench.sides,
                        kernel,
                        bench.reps,
                        seed=self.cfg.seed,
                        include_transforms=bench.include_transforms,
                        channels=bench.channels,
                    )
                )
            table = table.extend(convs)
            per_kernel = convs.extend(pools)
            check_expectations(per_kernel)
            sections.append(f"## Kernel {kernel}x{kernel}\n\n" + per_kernel.summary_markdown())
            for kind in conv_kinds:
                try:
                    fits.append([kind, kernel, fit_loglog_slope(convs, kind)])
                except InsufficientDataError:
                    fits.append([kind, kernel, None])
            if set(conv_kinds) >= {"spatial_conv", "spectral_conv"}:
                try:
                    cross = crossover_size(
                        TimingTable(convs.for_kind("spatial_conv")),
                        TimingTable(convs.for_kind("spectral_conv")),
                    )
                except InvalidShapeError:
                    cross = None
                fits.append(["crossover", kernel, cross])

        self.metrics.observe_timings(table)
        report.write_csv("timing.csv", table.to_csv())
        report.write_csv("scaling.csv", ("kind", "kernel", "measured_value"), fits)

        network_rows = self._network_timings()
        report.write_csv("network_timing.csv", NETWORK_TIMING_COLUMNS, network_rows)
        report.write_markdown(
            "bench.md",
            "# Benchmarks\n\n"
            + "\n".join(sections)
            + "\n## Networks\n\n"
            + markdown_table(("network", "side", "ms/img", "MAD ms/img"), network_rows),
        )

    def _network_timings(self) -> List[list]:
        side = max(self.cfg.resolutions)
        channels, classes = DATASET_LAYOUT[self.cfg.dataset]
        teacher = build_teacher(self.cfg.teacher_spec, Shape4(1, channels, side, side), classes)
        rows = []
        for net in (teacher, student_spec(teacher, "sclc")):
            ms, mad = time_network(net, init_params(net, self.cfg.seed), reps=self.cfg.bench.reps)
            rows.append([net.name, side, ms, mad])
        return rows

    def latency(self, report: ReportWriter) -> None:
        breakdown = latency_estimate(self.cfg.latency)
        logger.info("Latency estimate: %.4f ms/img", breakdown.total_ms)
        report.write_csv(
            "latency.csv",
            csv_text(
                ("term", "ms"),
                [
                    ("optical", breakdown.optical_ms),
                    ("transduction", breakdown.transduction_ms),
                    ("backend", breakdown.backend_ms),
                    ("total", breakdown.total_ms),
                ],
            ),
        )
        report.write_markdown("latency.md", "# Latency estimate\n\n" + breakdown.to_markdown())

    def gridsearch(self, report: ReportWriter) -> None:
        """KD student accuracy over the alpha x temperature grid."""
        train, test = self.load_data()
        teacher = self.teacher_spec(train)
        teacher_params = self.load_teacher(teacher)
        net = student_spec(teacher, self.cfg.variant)
        rows = []
        for alpha in ALPHA_GRID:
            for temperature in TEMPERATURE_GRID:
                cfg = self.cfg.student.model_copy(
                    update={"alpha": alpha, "temperature": temperature}
                )
                run = self.fit_student(
                    teacher,
                    teacher_params,
                    net,
                    train,
                    test,
                    self.cfg.seed,
                    True,
                    self.cfg.variant,
                    cfg,
                )
                rows.append([alpha, temperature, run.final_accuracy, run.status])

        report.write_csv("gridsearch.csv", GRID_COLUMNS, rows)
        finished = [r for r in rows if r[2] is not None]
        if finished:
            best = max(finished, key=lambda r: r[2])
            summary = f"Best: alpha={best[0]} T={best[1]} accuracy={best[2]:.4f}\n\n"
        else:
            summary = "No run finished.\n\n"
        report.write_markdown(
            "gridsearch.md",
            "# KD grid search\n\n"
            + summary
            + markdown_table(("alpha", "T", "accuracy", "status"), rows),
        )


def run(command: Union[Command, str], cfg: ExperimentConfig) -> int:
    """Run one command; returns the process exit status."""
    return ExperimentRunner(cfg).run(Command(command))
