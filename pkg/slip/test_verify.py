"""
Tests for the convergence experiments.

The fast-scale and return-time orders are fitted on the full default grid;
the lower half of it is still pre-asymptotic for those slopes.
"""

import math

import numpy as np
import pytest

from slip.bvp import SweepRow, SweepTable, k_star_approx
from slip.errors import ConvergenceError, DomainError
from slip.model import TouchdownConditions
from slip.verify import (
    DRIFT_TOLERANCE,
    ConvergenceReport,
    ExperimentConfig,
    Sample,
    default_k_grid,
    fast_scale_error,
    fit_order,
    k_ratio_study,
    ratio_deviation,
    slow_scale_error,
    solved_t_star_report,
    sup_error,
    t_star_order,
)

TD = TouchdownConditions(0.4, 1.0, 0.1)
KS = list(np.logspace(2, 4, 5))
ALPHAS = [0.05, 0.1, 0.2, 0.4]


@pytest.fixture(scope="module")
def fast_reports():
    return fast_scale_error(TD, default_k_grid())


@pytest.fixture(scope="module")
def expanding_reports():
    return fast_scale_error(TD, default_k_grid(), expanding=True)


@pytest.fixture(scope="module")
def ratio_table():
    return k_ratio_study(ALPHAS, 1.0, 0.1)


class TestFitOrder:
    """Least-squares slope on log-log data."""

    def test_exact_power_law(self):
        Ks = [1e2, 1e3, 1e4, 1e5]
        slope, residual = fit_order([(K, K ** -1.5) for K in Ks])
        assert slope == pytest.approx(-1.5, abs=1e-12)
        assert residual == pytest.approx(0.0, abs=1e-12)

    def test_scaled_power_law(self):
        slope, _ = fit_order([(K, 3.0 / K) for K in (10.0, 100.0, 1000.0)])
        assert slope == pytest.approx(-1.0, abs=1e-12)

    def test_nonpositive_error_rejected(self):
        with pytest.raises(DomainError):
            fit_order([(10.0, 1e-3), (100.0, 0.0)])

    def test_noise_floor_excluded(self):
        slope, _ = fit_order([(10.0, 1e-3), (100.0, 1e-4), (1000.0, 1e-15)])
        assert slope == pytest.approx(-1.0)

    def test_needs_two_samples(self):
        with pytest.raises(DomainError):
            fit_order([(10.0, 1e-3)])


class TestReport:
    """Report invariants."""

    def test_needs_four_samples(self):
        samples = [Sample(K, K ** -0.5, 1.0 / K) for K in (1e2, 1e3, 1e4)]
        with pytest.raises(DomainError):
            ConvergenceReport("x", samples)

    def test_increasing_K(self):
        samples = [Sample(K, K ** -0.5, 1.0 / K) for K in (1e2, 1e4, 1e3, 1e5)]
        with pytest.raises(DomainError):
            ConvergenceReport("x", samples)

    def test_grid_validation(self):
        with pytest.raises(DomainError):
            fast_scale_error(TD, [5.0, 50.0, 500.0, 5000.0])
        with pytest.raises(DomainError):
            slow_scale_error(TD, [1e2, 1e3])

    def test_default_grid(self):
        grid = default_k_grid()
        assert len(grid) == 9
        assert grid[0] == pytest.approx(1e2)
        assert grid[-1] == pytest.approx(1e6)

    def test_config(self):
        cfg = ExperimentConfig()
        assert cfg.step(0.01) == pytest.approx(0.01 / 50 / 16)
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
        with pytest.raises(DomainError):
            ExperimentConfig(norm="l2")

    def test_drift_above_bound_is_flagged(self):
        samples = [Sample(K, K ** -0.5, 1.0 / K, energy_drift=1e-13, drift_bound=1e-12) for K in (1e2, 1e3, 1e4, 1e5)]
        samples[2] = Sample(1e4, 1e-2, 1e-4, energy_drift=5e-12, drift_bound=1e-12)
        report = ConvergenceReport("x", samples)
        assert report.drift_flagged == [1e4]
        assert report.to_dict()["drift_flagged"] == [1e4]

    def test_unknown_drift_is_not_flagged(self):
        assert Sample(1e2, 0.1, 1e-3).drift_ok
        assert Sample(1e2, 0.1, 1e-3, energy_drift=1.0).drift_ok

    def test_identical_curves_have_zero_error(self):
        a = np.linspace(0.0, 1.0, 7)
        assert sup_error(a, a) == 0.0


class TestFastScale:
    """Fast-scale approximation errors on tau+ <= pi."""

    def test_third_order(self, fast_reports):
        L_report, theta_report = fast_reports
        for report in (L_report, theta_report):
            assert -1.65 <= report.slope <= -1.35
            assert report.residual < 0.15
            assert not report.failed

    def test_errors_decrease(self, fast_reports):
        for report in fast_reports:
            assert np.all(np.diff(report.errors) < 0)

    def test_metadata(self, fast_reports):
        meta = fast_reports[0].metadata
        assert meta["interval"] == "tau+ <= T"
        assert meta["experiment_config"]["norm"] == "sup"
        assert meta["T"] == pytest.approx(math.pi)

    def test_energy_drift_recorded(self, fast_reports):
        assert all(s.energy_drift < 1e-10 for s in fast_reports[0].samples)

    def test_endpoint_not_above_sup(self, fast_reports):
        for s in fast_reports[0].samples:
            assert s.endpoint_error <= s.sup_error

    def test_first_order_approximation(self):
        L_report, _ = fast_scale_error(TD, KS, order=1)
        assert -1.15 <= L_report.slope <= -0.85

    def test_expanding_interval_loses_an_order(self, fast_reports, expanding_reports):
        L_expanding = expanding_reports[0]
        assert -1.15 <= L_expanding.slope <= -0.85
        assert fast_reports[0].slope - L_expanding.slope == pytest.approx(-0.5, abs=0.15)
        assert expanding_reports[1].metadata["interval"] == "tau+ <= T/eps"


class TestSlowScale:
    """Leading-order slow angle."""

    def test_slope(self):
        report = slow_scale_error(TD, KS)
        assert report.slope <= -0.35
        assert np.all(np.isfinite(report.errors))
        assert all(math.isfinite(s.energy_drift) for s in report.samples)
        assert all(s.drift_bound == DRIFT_TOLERANCE * 1.0 for s in report.samples)

    def test_small_angle_reference(self):
        td = TouchdownConditions(0.01, 0.01 / math.cos(0.01), 0.0)
        numerical = slow_scale_error(td, KS)
        closed = slow_scale_error(td, KS, method="small_angle")
        assert np.max(np.abs(closed.errors - numerical.errors)) < 1e-6


class TestReturnTime:
    """Raw and refined return-time deviations."""

    def test_refined_is_second_order(self):
        raw, refined = t_star_order(TD, default_k_grid())
        assert -1.15 <= refined.slope <= -0.85
        assert -0.65 <= raw.slope <= -0.35
        assert np.all(refined.errors < raw.errors)
        for s in refined.samples:
            assert 0 <= s.energy_drift < 1e-10
            assert s.drift_bound == pytest.approx(DRIFT_TOLERANCE * math.pi, rel=0.2)


class TestKRatio:
    """K*/K~* as alpha decreases."""

    def test_ratio_approaches_one(self, ratio_table):
        deviation = ratio_deviation(ratio_table)
        assert np.all(np.isfinite(deviation))
        assert np.all(np.diff(deviation) > 0)
        assert deviation[0] < 0.05
        assert ratio_table.rows[0].K_approx == k_star_approx(TouchdownConditions(0.05, 1.0, 0.1))

    def test_solved_return_time_order(self, ratio_table):
        report = solved_t_star_report(ratio_table)
        assert report.experiment == "tstar-solved"
        assert report.Ks == pytest.approx(sorted(row.K_star for row in ratio_table.rows))
        assert np.all(np.diff(report.errors) < 0)
        assert report.slope <= -1.0
        assert report.metadata["failed_alphas"] == []

    def test_solved_report_on_exact_data(self):
        rows = [
            SweepRow(alpha, 1.0, 0.1, K_star=K, t_star=math.pi / math.sqrt(K) + K ** -1.5)
            for alpha, K in ((0.4, 100.0), (0.2, 400.0), (0.1, 1600.0), (0.05, 6400.0))
        ]
        report = solved_t_star_report(SweepTable(rows))
        assert report.Ks == pytest.approx([100.0, 400.0, 1600.0, 6400.0])
        assert report.slope == pytest.approx(-1.5, abs=1e-6)

    def test_solved_report_needs_enough_solves(self):
        rows = [SweepRow(0.4, 1.0, 0.1, K_star=15.6, t_star=0.8), SweepRow(0.2, 1.0, 0.1, K_star=60.0, t_star=0.4)]
        rows += [SweepRow(alpha, 1.0, 0.1, error="ConvergenceError") for alpha in (0.1, 0.05)]
        with pytest.raises(ConvergenceError):
            solved_t_star_report(SweepTable(rows))

    def test_empty(self):
        with pytest.raises(DomainError):
            k_ratio_study([])
