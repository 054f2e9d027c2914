"""Deviation, normality and scaling statistics."""

import math
from dataclasses import replace

import numpy as np
import pytest

from epiflux.domain.models import (
    FluctuationSample,
    FractionState,
    ModelParams,
    PopulationState,
    RecordMode,
    SimConfig,
)
from epiflux.exceptions import DegenerateSampleError, GridMismatchError, RegressionInputError
from epiflux.services.ensemble import RunSummary
from epiflux.services.fluctuation import limit_covariance
from epiflux.services.meanfield import integrate
from epiflux.services.simulator import simulate
from epiflux.services.statistics import (
    ScalingPoint,
    deviation_from_summaries,
    deviation_report,
    export_normality,
    export_scaling,
    freedman_diaconis_bins,
    histogram,
    normality_report,
    scaling_point,
    scaling_regression,
    theory_ratio,
)
from tests.conftest import baseline_params


def samples_from(values, component=2):
    out = []
    for k, v in enumerate(values):
        w = [0.0, 0.0, 0.0]
        w[component - 1] = float(v)
        out.append(FluctuationSample(t=1.0, w=tuple(w), n_scale=100, run_index=k))
    return out


def summary(index, n, w2, infectives):
    state = PopulationState(n - infectives, infectives, 0)
    return RunSummary(
        run_index=index,
        n_scale=n,
        final=state,
        observed=((1.0, state),),
        w=(FluctuationSample(t=1.0, w=(0.0, w2, 0.0), n_scale=n, run_index=index),),
    )


class TestDeviationReport:
    def frozen_runs(self, record_mode=RecordMode.SAMPLED_GRID, grid_dt=0.1):
        params = ModelParams(nu=0.0, gamma=0.0, beta0=0.0, beta1=0.0, n_scale=10)
        config = SimConfig(params=params, t_end=1.0, record_mode=record_mode, grid_dt=grid_dt)
        runs = [
            simulate(replace(config, stream_index=k), PopulationState(8, 2, 0))
            for k in range(3)
        ]
        ode = integrate(params, FractionState(0.8, 0.2, 0.0), 1.0, 1e-3)
        return runs, ode

    def test_frozen_dynamics_have_zero_deviation(self):
        runs, ode = self.frozen_runs()
        report = deviation_report(runs, ode)
        assert report.per_run == (0.0, 0.0, 0.0)
        assert report.mean == report.q95 == 0.0
        assert report.n_scale == 10

    def test_runs_without_grid(self):
        runs, ode = self.frozen_runs(record_mode=RecordMode.ENDPOINT_ONLY, grid_dt=None)
        with pytest.raises(GridMismatchError):
            deviation_report(runs, ode)

    def test_grid_off_the_ode_steps(self):
        runs, _ = self.frozen_runs(grid_dt=0.1)
        params = ModelParams(nu=0.0, gamma=0.0, beta0=0.0, beta1=0.0, n_scale=10)
        coarse = integrate(params, FractionState(0.8, 0.2, 0.0), 1.0, 0.3)
        with pytest.raises(GridMismatchError, match='aligned'):
            deviation_report(runs, coarse)

    def test_from_summaries(self):
        summaries = [summary(k, 100, 0.0, 10) for k in range(3)]
        with pytest.raises(GridMismatchError):
            deviation_from_summaries(summaries)
        with_dev = [
            replace(s, sup_deviation=d)
            for s, d in zip(summaries, (0.1, 0.2, 0.3))
        ]
        report = deviation_from_summaries(with_dev)
        assert report.mean == pytest.approx(0.2)
        assert report.q50 == pytest.approx(0.2)


class TestHistogram:
    def test_fd_bins_match_numpy(self):
        values = np.random.default_rng(1).normal(size=500)
        np.testing.assert_array_equal(
            freedman_diaconis_bins(values), np.histogram_bin_edges(values, bins='fd')
        )

    def test_counts_and_density(self):
        values = np.random.default_rng(2).normal(size=400)
        hist = histogram(values)
        assert hist.counts.sum() == 400
        assert len(hist.centers) == len(hist.counts)
        assert float(np.sum(hist.density * np.diff(hist.edges))) == pytest.approx(1.0)


class TestNormalityReport:
    def test_normal_sample_passes(self):
        values = np.random.default_rng(20240601).normal(0.0, 2.0, size=2000)
        report = normality_report(samples_from(values), 2, theory_var=4.0)
        assert report.ks_p > 0.01
        assert report.n_samples == 2000
        assert abs(report.sample_mean[1]) < 4 * report.standard_error
        assert report.sample_std[1] ** 2 == pytest.approx(4.0, rel=0.15)
        assert report.fitted_normal[1] == pytest.approx(2.0, rel=0.1)

    def test_wrong_variance_is_rejected(self):
        values = np.random.default_rng(7).normal(0.0, 2.0, size=2000)
        report = normality_report(samples_from(values), 2, theory_var=1.0)
        assert report.ks_p < 1e-6

    def test_curves_and_export(self, store):
        values = np.random.default_rng(3).normal(size=300)
        report = normality_report(samples_from(values, component=1), 1, theory_var=1.0)
        curves = report.curves()
        assert len(curves) == len(report.histogram.counts)
        export_normality(store, report)
        assert store.read_rows('normality_hist.csv')[0] == ['bin_lo', 'bin_hi', 'count']
        assert store.read_rows('normality_curves.csv')[0] == ['x', 'fitted_pdf', 'theory_pdf']

    def test_rejection_rate_under_the_null(self):
        """Samples drawn from the theory normal are rejected at about the nominal 5%."""
        rng = np.random.default_rng(16)
        trials = 1000
        rejected = sum(
            normality_report(samples_from(rng.normal(0.0, 1.5, size=100)), 2, 2.25).ks_p < 0.05
            for _ in range(trials)
        )
        assert 0.03 <= rejected / trials <= 0.07

    def test_too_few_samples(self):
        with pytest.raises(DegenerateSampleError, match='at least 100'):
            normality_report(samples_from(np.arange(99.0)), 2, theory_var=1.0)

    def test_zero_variance(self):
        with pytest.raises(DegenerateSampleError, match='zero variance'):
            normality_report(samples_from(np.ones(150)), 2, theory_var=1.0)

    @pytest.mark.parametrize('component', [0, 4])
    def test_bad_component(self, component):
        with pytest.raises(ValueError):
            normality_report(samples_from(np.arange(150.0)), component, theory_var=1.0)

    @pytest.mark.parametrize('var', [0.0, -1.0])
    def test_degenerate_theory_variance(self, var):
        """A limit law concentrated at zero cannot be tested against."""
        with pytest.raises(DegenerateSampleError, match='theory variance'):
            normality_report(samples_from(np.arange(150.0)), 2, theory_var=var)


class TestScaling:
    def test_exact_power_law(self):
        """ratio = 3 / sqrt(N) recovers slope -1/2 exactly."""
        points = [
            ScalingPoint.from_moments(n, 3.0 / math.sqrt(n), 1.0) for n in (10**3, 10**4, 10**5)
        ]
        fit = scaling_regression(points)
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)
        assert fit.intercept == pytest.approx(math.log10(3.0), abs=1e-12)
        assert fit.r2 == pytest.approx(1.0)

    def test_slope_under_lognormal_noise(self):
        """Nine sizes with 5% lognormal noise on the ratio recover -1/2 to within 0.06."""
        rng = np.random.default_rng(17)
        sizes = [round(10 ** (3 + k / 4)) for k in range(9)]
        hits = 0
        for _ in range(1000):
            noise = rng.lognormal(0.0, 0.05, size=len(sizes))
            points = [
                ScalingPoint.from_moments(n, 3.0 / math.sqrt(n) * e, 1.0)
                for n, e in zip(sizes, noise)
            ]
            hits += -0.56 <= scaling_regression(points).slope <= -0.44
        assert hits >= 950

    def test_too_few_points(self):
        points = [ScalingPoint.from_moments(n, 0.1, 1.0) for n in (10, 100)]
        with pytest.raises(RegressionInputError, match='at least 3'):
            scaling_regression(points)

    def test_duplicate_sizes(self):
        points = [ScalingPoint.from_moments(n, 0.1, 1.0) for n in (10, 100, 100)]
        with pytest.raises(RegressionInputError, match='distinct'):
            scaling_regression(points)

    def test_zero_ratio(self):
        sizes = ((10, 0.1), (100, 0.0), (1000, 0.1))
        points = [ScalingPoint.from_moments(n, s, 1.0) for n, s in sizes]
        with pytest.raises(RegressionInputError, match='positive'):
            scaling_regression(points)

    def test_nonpositive_mean(self):
        with pytest.raises(RegressionInputError):
            ScalingPoint.from_moments(100, 0.1, 0.0)
        with pytest.raises(RegressionInputError):
            ScalingPoint.from_moments(100, -0.1, 0.5)

    def test_point_from_summaries(self):
        summaries = [summary(0, 100, 1.0, 10), summary(1, 100, 3.0, 30)]
        point = scaling_point(summaries, 1.0)
        assert point.n == 100
        assert point.f_i == pytest.approx(0.2)
        assert point.sigma_i == pytest.approx(math.sqrt(2.0) / 10)
        assert point.ratio == pytest.approx(point.sigma_i / 0.2)

    def test_point_needs_two_runs(self):
        with pytest.raises(DegenerateSampleError):
            scaling_point([summary(0, 100, 1.0, 10)], 1.0)

    def test_theory_ratio(self):
        params = baseline_params()
        start = FractionState(0.92, 0.08, 0.0)
        ode = integrate(params, start, 1.0, 1e-3)
        sigma = limit_covariance(params, ode, 1.0)
        expected = math.sqrt(sigma.at(1.0)[1, 1] / 10_000) / ode.at(1.0).y
        assert theory_ratio(sigma, ode, 10_000, 1.0) == pytest.approx(expected)
        assert theory_ratio(sigma, ode, 40_000, 1.0) == pytest.approx(expected / 2)

    def test_export(self, store):
        export_scaling(store, [ScalingPoint.from_moments(1000, 0.5, 0.25)])
        assert store.read_rows('scaling.csv') == [
            ['n', 'sigma_i', 'f_i', 'ratio'],
            ['1000', '0.5', '0.25', '2'],
        ]
