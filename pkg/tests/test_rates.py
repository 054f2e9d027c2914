import math

import numpy as np
import pytest

from epiflux.domain.models import EventKind, ModelParams, PopulationState
from epiflux.exceptions import StateUnderflowError
from epiflux.services.rates import (
    acceptance_ratio,
    apply_event,
    beta_antiderivative,
    beta_antiderivative_grid,
    beta_at,
    event_rate,
    event_rates,
    truncated_event_rate,
)
from tests.conftest import baseline_params


class TestSeasonalForcing:
    """beta(t) = beta0 (1 + beta1 cos 2 pi t) and its antiderivative."""

    def test_peak_and_trough(self):
        params = baseline_params()
        assert beta_at(params, 0.0) == pytest.approx(28.0)
        assert beta_at(params, 0.5) == pytest.approx(12.0)
        assert beta_at(params, 1.0) == pytest.approx(28.0)

    def test_antiderivative_over_one_year_is_beta0(self):
        params = baseline_params()
        assert beta_antiderivative(params, 0.0) == 0.0
        assert beta_antiderivative(params, 1.0) == pytest.approx(20.0, rel=1e-14)

    def test_antiderivative_matches_quadrature(self):
        """Closed form agrees with numerical integration of beta."""
        from scipy.integrate import quad

        params = baseline_params()
        for t in (0.13, 0.5, 1.77):
            numeric, _ = quad(lambda s: beta_at(params, s), 0.0, t, epsabs=1e-13)
            assert beta_antiderivative(params, t) == pytest.approx(numeric, rel=1e-12)

    def test_periodic_in_years(self):
        params = baseline_params()
        times = np.random.default_rng(5).uniform(0.0, 10.0, size=10_000)
        worst = max(abs(beta_at(params, t + 1.0) - beta_at(params, t)) for t in times)
        assert worst <= 1e-12 * params.beta0

    def test_stays_within_forcing_band(self):
        params = baseline_params()
        times = np.random.default_rng(6).uniform(0.0, 10.0, size=10_000)
        values = np.array([beta_at(params, t) for t in times])
        assert values.min() >= params.beta0 * (1 - params.beta1) - 1e-12
        assert values.max() <= params.beta_max + 1e-12

    def test_antiderivative_on_random_intervals(self):
        from scipy.integrate import quad

        params = baseline_params()
        rng = np.random.default_rng(8)
        for a, b in np.sort(rng.uniform(0.0, 10.0, size=(100, 2)), axis=1):
            numeric, _ = quad(lambda s: beta_at(params, s), a, b, epsabs=1e-13, limit=200)
            closed = beta_antiderivative(params, b) - beta_antiderivative(params, a)
            assert closed == pytest.approx(numeric, abs=1e-9)

    def test_antiderivative_differentiates_to_beta(self):
        params = baseline_params()
        step = 1e-5
        for t in np.random.default_rng(9).uniform(step, 10.0, size=200):
            slope = (
                beta_antiderivative(params, t + step) - beta_antiderivative(params, t - step)
            ) / (2 * step)
            assert slope == pytest.approx(beta_at(params, t), rel=1e-8)

    def test_acceptance_ratio_range(self):
        params = baseline_params()
        low = (1 - params.beta1) / (1 + params.beta1)
        ratios = [acceptance_ratio(params, t) for t in np.linspace(0.0, 2.0, 1001)]
        assert min(ratios) == pytest.approx(low)
        assert max(ratios) == 1.0
        unforced = ModelParams(nu=1, gamma=1, beta0=0, beta1=0, n_scale=10)
        assert acceptance_ratio(unforced, 0.3) == 0.0

    def test_unforced_mode_is_constant(self):
        params = ModelParams(nu=1, gamma=10, beta0=20, beta1=0.0, n_scale=10)
        assert {beta_at(params, t) for t in (0.0, 0.3, 0.75)} == {20.0}

    def test_vectorised_antiderivative(self):
        params = baseline_params()
        times = np.array([0.0, 0.25, 1.3])
        expected = [beta_antiderivative(params, float(t)) for t in times]
        np.testing.assert_allclose(beta_antiderivative_grid(params, times), expected, rtol=1e-15)


class TestEventRates:
    """Rates of the six transitions."""

    def test_baseline_initial_state(self):
        """At N=10^4, t=0 the infection rate is 28 * 9200 * 800 / 10^4."""
        params = baseline_params(10_000)
        state = PopulationState(9200, 800, 0)
        rates = event_rates(params, state, 0.0)
        assert rates[EventKind.BIRTH] == pytest.approx(10_000.0)
        assert rates[EventKind.SUSCEPTIBLE_DEATH] == pytest.approx(9200.0)
        assert rates[EventKind.INFECTION] == pytest.approx(20_608.0)
        assert rates[EventKind.RECOVERY] == pytest.approx(8000.0)
        assert rates[EventKind.INFECTIOUS_DEATH] == pytest.approx(800.0)
        assert rates[EventKind.RECOVERED_DEATH] == 0.0

    def test_single_rate_lookup(self):
        params = baseline_params(100)
        state = PopulationState(90, 10, 0)
        assert event_rate(params, state, 0.5, EventKind.INFECTION) == pytest.approx(
            12.0 * 90 * 10 / 100
        )

    def test_empty_population_has_zero_rates(self):
        """0/0 in the infection term resolves to 0."""
        rates = event_rates(baseline_params(10), PopulationState(0, 0, 0), 0.0)
        assert rates == (0.0,) * 6

    def test_truncated_rates_cap_counts(self):
        """Counts enter the truncated rates capped at 2N."""
        params = baseline_params(100)
        state = PopulationState(500, 300, 50)
        assert truncated_event_rate(params, state, 0.0, EventKind.SUSCEPTIBLE_DEATH) == 200.0
        assert truncated_event_rate(params, state, 0.0, EventKind.BIRTH) == 200.0
        assert truncated_event_rate(params, state, 0.0, EventKind.RECOVERY) == 2000.0
        assert truncated_event_rate(params, state, 0.0, EventKind.RECOVERED_DEATH) == 50.0
        assert truncated_event_rate(
            params, state, 0.0, EventKind.INFECTION
        ) == pytest.approx(28.0 * 200 * 300 / 850)

    def test_truncated_equals_original_below_cap(self):
        params = baseline_params(100)
        state = PopulationState(90, 60, 40)
        for kind in EventKind:
            assert truncated_event_rate(params, state, 0.3, kind) == event_rate(
                params, state, 0.3, kind
            )

    def test_each_truncated_rate_bounded(self):
        """Every truncated rate is at most M N, whatever the state and time."""
        params = baseline_params(100)
        bound = params.max_total_rate()
        rng = np.random.default_rng(12)
        for _ in range(500):
            s, i, r = (int(c) for c in rng.integers(0, 10 * 100, size=3))
            if s + i + r == 0:
                continue
            t = float(rng.uniform(0.0, 2.0))
            for kind in EventKind:
                rate = truncated_event_rate(params, PopulationState(s, i, r), t, kind)
                assert 0.0 <= rate <= bound

    def test_total_truncated_rate_bounded(self):
        """The truncated total never exceeds the bound times a constant."""
        params = baseline_params(100)
        state = PopulationState(10_000, 5000, 3000)
        total = sum(event_rates(params, state, 0.0, truncated=True))
        assert math.isfinite(total)
        assert total <= 6 * params.max_total_rate()


class TestApplyEvent:
    def test_infection(self):
        assert apply_event(PopulationState(5, 1, 0), EventKind.INFECTION).as_tuple() == (4, 2, 0)

    def test_underflow_raises(self):
        """Decrementing an empty compartment is a contract violation."""
        with pytest.raises(StateUnderflowError) as exc_info:
            apply_event(PopulationState(0, 3, 0), EventKind.SUSCEPTIBLE_DEATH)
        assert exc_info.value.state == (0, 3, 0)
        assert 'susceptible_death' in str(exc_info.value)

    @pytest.mark.parametrize(
        'kind, change',
        [
            (EventKind.BIRTH, 1),
            (EventKind.SUSCEPTIBLE_DEATH, -1),
            (EventKind.INFECTION, 0),
            (EventKind.RECOVERY, 0),
            (EventKind.INFECTIOUS_DEATH, -1),
            (EventKind.RECOVERED_DEATH, -1),
        ],
    )
    def test_population_change(self, kind, change):
        state = PopulationState(5, 4, 3)
        after = apply_event(state, kind)
        assert after.total() - state.total() == change
        assert after.as_tuple() == tuple(a + d for a, d in zip(state.as_tuple(), kind.jump))
