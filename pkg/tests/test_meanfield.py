import math

import numpy as np
import pytest

from epiflux.domain.models import FractionState, ModelParams, PopulationState, SimConfig
from epiflux.exceptions import HorizonError, StepSizeError
from epiflux.services.meanfield import (
    drift,
    drift_integral_along_path,
    export_ode,
    final_size,
    integrate,
)
from epiflux.services.simulator import simulate
from tests.conftest import baseline_initial, baseline_params

BASELINE_START = FractionState(0.92, 0.08, 0.0)


class TestDrift:
    """The drift field F."""

    def test_baseline_initial_state(self):
        """At t=0, beta = 28 and the force of infection is 28 * 0.92 * 0.08."""
        f = drift(baseline_params(), BASELINE_START, 0.0)
        assert f.f1 == pytest.approx(0.08 - 2.0608)
        assert f.f2 == pytest.approx(2.0608 - 11 * 0.08)
        assert f.f3 == pytest.approx(0.8)

    @pytest.mark.parametrize('t', [0.0, 0.21, 0.5, 1.37])
    def test_components_sum_to_zero(self, t):
        """Births balance deaths: F1 + F2 + F3 = 0."""
        for state in (BASELINE_START, FractionState(0.3, 0.5, 0.4), FractionState(1.2, 0.1, 0.0)):
            assert drift(baseline_params(), state, t).total() == pytest.approx(0.0, abs=1e-14)

    def test_zero_mass_is_absorbing(self):
        assert drift(baseline_params(), FractionState(0.0, 0.0, 0.0), 0.3) == (0.0, 0.0, 0.0)


class TestIntegrate:
    """Fixed-step RK4 of the mean-field ODE."""

    def test_richardson_order(self):
        """Halving h shrinks the error sixteenfold."""
        params = baseline_params()
        coarse, mid, fine = (
            integrate(params, BASELINE_START, 1.0, h).final().as_array()
            for h in (1e-3, 5e-4, 2.5e-4)
        )
        ratio = np.abs(coarse - mid).max() / np.abs(mid - fine).max()
        assert 3.5 <= math.log2(ratio) <= 4.5

    def test_mass_conservation(self):
        params = baseline_params()
        solution = integrate(params, BASELINE_START, 10.0, 1e-3)
        assert np.abs(solution.states.sum(axis=1) - 1.0).max() <= 1e-9

    def test_partial_last_step_lands_on_t_end(self):
        solution = integrate(baseline_params(), BASELINE_START, 0.0105, 1e-3)
        assert solution.times[-1] == 0.0105
        assert len(solution.times) == 12

    def test_grid_layout(self):
        solution = integrate(baseline_params(), BASELINE_START, 2.0, 1e-3)
        assert solution.states.shape == (2001, 3)
        assert solution.t_end == 2.0
        assert solution.grid[0][1] == BASELINE_START

    def test_step_too_large(self):
        """A step that overshoots into negative fractions is reported."""
        params = ModelParams(nu=0.0, gamma=0.0, beta0=1000.0, beta1=0.0, n_scale=1)
        with pytest.raises(StepSizeError):
            integrate(params, BASELINE_START, 1.0, 0.1)

    def test_interpolation_and_horizon(self):
        solution = integrate(baseline_params(), BASELINE_START, 1.0, 1e-3)
        assert solution.at(0.5).as_array() == pytest.approx(solution.states[500])
        with pytest.raises(HorizonError):
            solution.at(1.5)
        with pytest.raises(HorizonError):
            solution.on_grid([-0.1, 0.2])

    def test_unforced_final_size(self):
        """Without demography or forcing the epidemic ends at the final-size root."""
        params = ModelParams(nu=0.0, gamma=10.0, beta0=20.0, beta1=0.0, n_scale=1)
        solution = integrate(params, FractionState(0.99, 0.01, 0.0), 20.0, 1e-3)
        assert solution.final().x == pytest.approx(final_size(2.0, 0.99, 0.01), abs=1e-6)
        assert solution.final().y < 1e-9

    def test_final_size_root(self):
        x_inf = final_size(2.0, 0.99, 0.01)
        assert 0.0 < x_inf < 0.99
        assert math.log(x_inf / 0.99) == pytest.approx(-2.0 * (1.0 - x_inf), abs=1e-12)

    def test_export(self, store):
        solution = integrate(baseline_params(), BASELINE_START, 0.002, 1e-3)
        export_ode(store, solution)
        rows = store.read_rows('ode.csv')
        assert rows[0] == ['t', 'x', 'y', 'z']
        assert len(rows) == 4
        assert rows[1] == ['0', '0.92000000000000004', '0.080000000000000002', '0']


class TestDriftAlongPath:
    """Exact drift integral along piecewise-constant sample paths."""

    def test_additive_over_intervals(self):
        params = baseline_params(500)
        traj = simulate(SimConfig(params=params, t_end=0.3, seed=4), baseline_initial(500))
        whole = np.array(drift_integral_along_path(params, traj))
        left = np.array(drift_integral_along_path(params, traj, 0.17))
        right = np.array(drift_integral_along_path(params, traj, 0.3, t_start=0.17))
        np.testing.assert_allclose(left + right, whole, rtol=1e-12, atol=1e-14)

    def test_constant_path(self):
        """No events: the integral is F at the initial state integrated in time."""
        params = ModelParams(nu=0.0, gamma=0.0, beta0=5.0, beta1=0.0, n_scale=10)
        initial = PopulationState(10, 0, 0)
        traj = simulate(SimConfig(params=params, t_end=1.0), initial)
        assert drift_integral_along_path(params, traj) == (0.0, 0.0, 0.0)

    def test_horizon(self):
        params = baseline_params(100)
        traj = simulate(SimConfig(params=params, t_end=0.1, seed=1), baseline_initial(100))
        with pytest.raises(HorizonError):
            drift_integral_along_path(params, traj, 0.2)
