"""Unit tests for layer timing, scaling fits and the latency model."""

from contextlib import nullcontext

import numpy as np
import pytest
from pydantic import ValidationError

from src.bench import (
    LatencyModel,
    TimingRow,
    TimingTable,
    check_expectations,
    crossover_size,
    fit_loglog_slope,
    latency_estimate,
    time_layer,
    time_network,
)
from src.bench.timing import _pin_single_core as pin_single_core
from src.errors import BenchmarkError, InsufficientDataError, InvalidShapeError
from src.network import init_params, linear_counterpart, tiny_cnn
from src.tensor import Shape4

SIDES = (64, 128, 256, 512, 1024)


def _table(kind, medians, sides=SIDES, kernel=3):
    return TimingTable([TimingRow(kind, s, kernel, 5, m, 0.0) for s, m in zip(sides, medians)])


@pytest.fixture(autouse=True)
def no_pinning(mocker):
    """Keep the test process on all of its cores."""
    mocker.patch("src.bench.timing._pin_single_core", nullcontext)


class TestScalingFit:
    """Test cases for log-log slope fitting."""

    def test_linear_in_pixels(self):
        """Test t proportional to H*W gives slope 1."""
        table = _table("spectral_conv", [1e-4 * s * s for s in SIDES])
        assert fit_loglog_slope(table, "spectral_conv") == pytest.approx(1.0)

    def test_n_log_n(self):
        """Test an N log N cost fits a slope slightly above 1."""
        table = _table("spectral_conv", [s * s * np.log2(s * s) for s in SIDES])
        assert 1.0 < fit_loglog_slope(table, "spectral_conv") < 1.25

    def test_small_sides_n_log_n(self):
        """Test small sides still fit between 1 and 1.25."""
        sides = (8, 16, 32, 64)
        table = _table("spectral_conv", [s * s * np.log2(s * s) for s in sides], sides)
        assert 1.0 < fit_loglog_slope(table, "spectral_conv") < 1.25

    def test_needs_four_rows(self):
        """Test three sizes are not enough."""
        table = _table("max_pool", [1.0, 2.0, 3.0], SIDES[:3])
        with pytest.raises(InsufficientDataError):
            fit_loglog_slope(table, "max_pool")

    def test_skipped_rows_ignored(self):
        """Test out-of-memory rows do not count towards the fit."""
        table = _table("spatial_conv", [1.0, 4.0, 16.0], SIDES[:3])
        table.rows.append(TimingRow("spatial_conv", 512, 3, 5, None, None, "skipped"))
        with pytest.raises(InsufficientDataError):
            fit_loglog_slope(table, "spatial_conv")


class TestCrossover:
    """Test cases for the conv crossover search."""

    def test_smallest_winning_side(self):
        """Test the first side where spectral is faster."""
        spatial = _table("spatial_conv", [1.0, 4.0, 16.0, 64.0, 256.0])
        spectral = _table("spectral_conv", [2.0, 5.0, 12.0, 30.0, 80.0])
        assert crossover_size(spatial, spectral) == 256

    def test_no_crossover(self):
        """Test None when spectral never wins."""
        spatial = _table("spatial_conv", [1.0, 2.0, 3.0, 4.0, 5.0])
        spectral = _table("spectral_conv", [2.0, 3.0, 4.0, 5.0, 6.0])
        assert crossover_size(spatial, spectral) is None

    def test_disjoint_sides(self):
        """Test tables without a shared side fail."""
        spatial = _table("spatial_conv", [1.0, 2.0], (8, 16))
        spectral = _table("spectral_conv", [1.0, 2.0], (32, 64))
        with pytest.raises(InvalidShapeError):
            crossover_size(spatial, spectral)


class TestExpectations:
    """Test cases for the soft hardware checks and the summary."""

    def test_all_met(self):
        """Test a well-behaved table passes every check."""
        table = _table("spatial_conv", [1e-3 * s**3 for s in SIDES]).extend(
            _table("spectral_conv", [1e-3 * s * s * np.log2(s) for s in SIDES])
        )
        assert check_expectations(table) == []

    def test_failures_reported(self):
        """Test inverted medians and a missing crossover are reported."""
        table = _table("spatial_conv", [1.0, 2.0, 3.0, 4.0, 5.0]).extend(
            _table("spectral_conv", [50.0, 40.0, 30.0, 20.0, 10.0])
        )
        failed = check_expectations(table)
        assert any("non-decreasing" in f for f in failed)
        assert any("never beats" in f for f in failed)

    def test_one_small_inversion_tolerated(self):
        """Test noise between the two smallest sizes is allowed."""
        table = _table("spectral_conv", [2.0, 1.0, 4.0, 8.0, 16.0])
        assert check_expectations(table) == []

    def test_summary_markdown(self):
        """Test the summary lists rows, slopes and the crossover."""
        table = _table("spatial_conv", [1.0, 4.0, 16.0, 64.0, 256.0]).extend(
            _table("spectral_conv", [2.0, 5.0, 12.0, 30.0, 80.0])
        )
        table.rows.append(TimingRow("max_pool", 64, 3, 5, None, None, "skipped"))
        text = table.summary_markdown()
        assert "| spatial_conv | 64 | 3 | 1.0000 | 0.0000 |" in text
        assert "| max_pool | 64 | 3 | skipped | |" in text
        assert "- spatial_conv: 1.000" in text
        assert "- max_pool: not enough sizes" in text
        assert "Crossover side: 256" in text

    def test_csv_without_timings(self):
        """Test the deterministic CSV view drops median and MAD."""
        text = _table("max_pool", [1.5], (64,)).to_csv(include_timings=False)
        assert text.splitlines() == ["kind,side,kernel,reps,status", "max_pool,64,3,5,ok"]


class TestTimeLayer:
    """Test cases for the measurement harness."""

    @pytest.mark.parametrize(
        "kind", ["spatial_conv", "spectral_conv", "max_pool", "spectral_pool"]
    )
    def test_one_row_per_side(self, kind):
        """Test every requested side is measured."""
        table = time_layer(kind, [8, 16], reps=5, warmup=1)
        assert [r.side for r in table.rows] == [8, 16]
        assert all(r.median_ms >= 0.0 and r.mad_ms >= 0.0 for r in table.rows)

    def test_with_transforms(self):
        """Test spectral kinds can include their own fft2 and ifft2."""
        table = time_layer("spectral_conv", [8], reps=5, warmup=0, include_transforms=True)
        assert not table.rows[0].skipped

    def test_too_few_reps(self):
        """Test fewer than five repetitions are refused."""
        with pytest.raises(BenchmarkError):
            time_layer("max_pool", [8], reps=4)

    def test_non_power_of_two_side(self):
        """Test sides must be powers of two."""
        with pytest.raises(InvalidShapeError):
            time_layer("spectral_pool", [12])

    def test_unknown_kind(self):
        """Test unknown kinds fail."""
        with pytest.raises(ValueError):
            time_layer("avg_pool", [8])

    def test_refuses_during_parallel_training(self, mocker):
        """Test timing is refused while training threads run."""
        mocker.patch("src.bench.timing.parallel_training_active", return_value=True)
        with pytest.raises(BenchmarkError):
            time_layer("max_pool", [8])

    def test_out_of_memory_is_skipped(self, mocker):
        """Test a MemoryError marks the size skipped and keeps going."""
        mocker.patch(
            "src.bench.timing._measure", side_effect=[MemoryError(), (1.0, 0.1)]
        )
        table = time_layer("max_pool", [8, 16])
        assert table.rows[0].skipped and table.rows[0].median_ms is None
        assert table.rows[1].median_ms == 1.0
        assert table.to_csv().splitlines()[1] == "max_pool,8,3,5,,,skipped"

    def test_out_of_memory_goes_through_guard(self, mocker):
        """Test the skip comes from the failure guard's out-of-memory recovery."""
        from src.resilience import FailureGuard

        mocker.patch("src.bench.timing._measure", side_effect=[MemoryError()])
        recovery = mocker.spy(FailureGuard, "recovery_for")
        time_layer("spectral_pool", [8])
        assert recovery.call_count == 1
        assert recovery.spy_return.action == "skip_row"

    def test_time_network(self):
        """Test per-image network timing."""
        student = linear_counterpart(tiny_cnn(Shape4(1, 1, 8, 8), 2))
        ms, mad = time_network(student, init_params(student), reps=5, batch_size=4, warmup=1)
        assert ms > 0.0 and mad >= 0.0


class TestCorePinning:
    """Test cases for single-core pinning during timing."""

    @pytest.fixture
    def affinity(self, mocker):
        mocker.patch("src.bench.timing.os.sched_getaffinity", return_value={2, 3}, create=True)
        return mocker.patch("src.bench.timing.os.sched_setaffinity", create=True)

    def test_affinity_restored(self, affinity):
        """Test the process is pinned inside the block and restored after it."""
        with pin_single_core():
            affinity.assert_called_once_with(0, {2})
        affinity.assert_called_with(0, {2, 3})
        assert affinity.call_count == 2

    def test_affinity_restored_on_error(self, affinity):
        """Test the original core set comes back when timing raises."""
        with pytest.raises(MemoryError):
            with pin_single_core():
                raise MemoryError()
        affinity.assert_called_with(0, {2, 3})

    def test_pinning_failure_is_not_fatal(self, affinity):
        """Test a refused pin logs and runs the block unpinned."""
        affinity.side_effect = OSError("not permitted")
        ran = []
        with pin_single_core():
            ran.append(True)
        assert ran == [True]
        assert affinity.call_count == 1


class TestLatency:
    """Test cases for the analytic latency model."""

    def test_default_total(self):
        """Test 100 kB over 2.5 Gb/s plus a 0.28 ms backend."""
        breakdown = latency_estimate(LatencyModel())
        assert breakdown.transduction_ms == pytest.approx(0.32)
        assert breakdown.total_ms == pytest.approx(0.60, abs=0.02)

    def test_zero_model(self):
        """Test an empty payload with no backend costs nothing."""
        breakdown = latency_estimate(LatencyModel(payload_bytes=0, backend_ms=0))
        assert breakdown.total_ms == 0.0

    def test_doubling_rate_halves_transduction(self):
        """Test transduction is inversely proportional to the link rate."""
        slow = latency_estimate(LatencyModel(link_rate_bits_per_s=1e9))
        fast = latency_estimate(LatencyModel(link_rate_bits_per_s=2e9))
        assert fast.transduction_ms == pytest.approx(slow.transduction_ms / 2)

    def test_zero_rate_rejected(self):
        """Test a zero link rate is invalid."""
        with pytest.raises(ValidationError):
            LatencyModel(link_rate_bits_per_s=0)

    def test_markdown(self):
        """Test the breakdown renders every term."""
        text = latency_estimate(LatencyModel()).to_markdown()
        assert "| **total** | **0.6000** |" in text


@pytest.mark.slow
class TestScalingRun:
    """Experiment-scale timing over the default side lengths."""

    def test_default_sides(self):
        """Test both conv kinds measure every side and the checks only warn."""
        table = time_layer("spatial_conv", SIDES, kernel_size=3).extend(
            time_layer("spectral_conv", SIDES, kernel_size=3)
        )
        assert len(table.for_kind("spectral_conv", measured_only=False)) == len(SIDES)
        assert isinstance(check_expectations(table), list)
        assert 0.8 < fit_loglog_slope(table, "spectral_conv") < 1.5
