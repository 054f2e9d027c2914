"""Mean-field limit: the drift field F and its fixed-step RK4 integration.

F is implemented in its N-free form with the ``x + y + z`` denominator; on
the simplex it coincides with the classical forced SIR equations. The same F
is integrated exactly along piecewise-constant sample paths, which is the
drift term of the fluctuation process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
from scipy.optimize import brentq

from epiflux.domain.models import FractionState, ModelParams, Trajectory
from epiflux.exceptions import HorizonError, StepSizeError
from epiflux.ports.artifact_store import ArtifactStore
from epiflux.ports.telemetry import Telemetry
from epiflux.services.constants import DEFAULT_ODE_STEP, NEGATIVE_TOLERANCE
from epiflux.services.rates import beta_antiderivative_grid, beta_at
from epiflux.services.simulator import JUMP_MATRIX


class DriftVector(NamedTuple):
    """Rates of change of (x, y, z), 1/year."""

    f1: float
    f2: float
    f3: float

    def total(self) -> float:
        return self.f1 + self.f2 + self.f3


def _rhs(
    params: ModelParams, x: float, y: float, z: float, t: float
) -> tuple[float, float, float]:
    mass = x + y + z
    if mass <= 0.0:
        return 0.0, 0.0, 0.0
    nu = params.nu
    gamma = params.gamma
    force = beta_at(params, t) * x * y / mass
    return (
        nu * (y + z) - force,
        force - (nu + gamma) * y,
        gamma * y - nu * z,
    )


def drift(params: ModelParams, state: FractionState, t: float) -> DriftVector:
    """Drift F(state, t); the zero-mass state is absorbing and has zero drift."""
    return DriftVector(*_rhs(params, state.x, state.y, state.z, t))


@dataclass(slots=True, frozen=True, eq=False)
class OdeSolution:
    """Fixed-step solution of the mean-field ODE.

    ``times`` has shape (n,), ``states`` shape (n, 3). Values between stored
    steps are linearly interpolated.
    """

    times: npt.NDArray[np.float64]
    states: npt.NDArray[np.float64]
    step: float
    params: ModelParams

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def grid(self) -> list[tuple[float, FractionState]]:
        return [
            (float(t), FractionState.from_array(row))
            for t, row in zip(self.times, self.states)
        ]

    def final(self) -> FractionState:
        return FractionState.from_array(self.states[-1])

    def _check(self, times: npt.NDArray[np.float64]) -> None:
        if times.size and (times.min() < 0.0 or times.max() > self.t_end + 1e-12):
            bad = float(times.max() if times.max() > self.t_end else times.min())
            raise HorizonError(bad, self.t_end)

    def on_grid(self, times: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Interpolated states at ``times``, shape (len(times), 3)."""
        ts = np.asarray(times, dtype=np.float64)
        self._check(ts)
        return np.column_stack(
            [np.interp(ts, self.times, self.states[:, k]) for k in range(3)]
        )

    def at(self, t: float) -> FractionState:
        return FractionState.from_array(self.on_grid([t])[0])


def integrate(
    params: ModelParams,
    initial: FractionState,
    t_end: float,
    h: float = DEFAULT_ODE_STEP,
    *,
    telemetry: Telemetry | None = None,
) -> OdeSolution:
    """Classical RK4 with fixed step ``h``; beta is evaluated at the stage times.

    A last, shorter step lands exactly on ``t_end`` when it is not a multiple of h.

    Raises:
        StepSizeError: a component fell below ``-1e-9``.
    """
    if not h > 0:
        raise ValueError('h must be positive')
    if not t_end >= h:
        raise ValueError('t_end must be at least h')

    n_full = math.floor(t_end / h + 1e-9)
    times = [k * h for k in range(n_full + 1)]
    if t_end - times[-1] > 1e-12:
        times.append(t_end)
    else:
        times[-1] = t_end

    out = np.empty((len(times), 3), dtype=np.float64)
    x, y, z = initial.x, initial.y, initial.z
    out[0] = (x, y, z)
    for k in range(1, len(times)):
        t0 = times[k - 1]
        dt = times[k] - t0
        half = 0.5 * dt
        a1, a2, a3 = _rhs(params, x, y, z, t0)
        b1, b2, b3 = _rhs(params, x + half * a1, y + half * a2, z + half * a3, t0 + half)
        c1, c2, c3 = _rhs(params, x + half * b1, y + half * b2, z + half * b3, t0 + half)
        d1, d2, d3 = _rhs(params, x + dt * c1, y + dt * c2, z + dt * c3, t0 + dt)
        sixth = dt / 6.0
        x += sixth * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
        y += sixth * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
        z += sixth * (a3 + 2.0 * b3 + 2.0 * c3 + d3)
        lowest = min(x, y, z)
        if lowest < -NEGATIVE_TOLERANCE:
            raise StepSizeError(h, times[k], lowest)
        out[k] = (x, y, z)

    if telemetry is not None:
        telemetry.record_event(
            'meanfield.integrate.ok', {'t_end': t_end, 'h': h, 'steps': len(times) - 1}
        )
    return OdeSolution(
        times=np.asarray(times, dtype=np.float64), states=out, step=h, params=params
    )


def drift_integral_along_path(
    params: ModelParams,
    traj: Trajectory,
    t_end: float | None = None,
    *,
    t_start: float = 0.0,
) -> tuple[float, float, float]:
    """Exact integral of F along the piecewise-constant path over [t_start, t_end].

    Non-beta terms integrate linearly in time, beta terms through the closed-form
    antiderivative, so the only error is float rounding.
    """
    if not traj.has_event_log:
        raise ValueError('trajectory was recorded without an event log')
    upper = traj.t_end if t_end is None else t_end
    if upper > traj.t_end or t_start < 0.0:
        raise HorizonError(upper if upper > traj.t_end else t_start, traj.t_end)
    if t_start > upper:
        raise ValueError('t_start must not exceed t_end')

    n = params.n_scale
    start = np.array(traj.initial.as_tuple(), dtype=np.float64)
    if traj.n_events:
        counts = start + np.cumsum(
            JUMP_MATRIX[traj.event_kinds.astype(np.int64)], axis=0
        ).astype(np.float64)
        states = np.vstack([start, counts])
    else:
        states = start[np.newaxis, :]
    knots = np.concatenate([[0.0], traj.event_times, [traj.t_end]])
    knots = np.clip(knots, t_start, upper)
    dt = np.diff(knots)
    db = np.diff(beta_antiderivative_grid(params, knots))

    s, i, r = states[:, 0], states[:, 1], states[:, 2]
    total = s + i + r
    with np.errstate(invalid='ignore', divide='ignore'):
        force = np.where(total > 0, s * i / (n * total), 0.0)
    y = i / n
    z = r / n
    nu = params.nu
    gamma = params.gamma
    f1 = float(np.sum(nu * (y + z) * dt - db * force))
    f2 = float(np.sum(db * force - (nu + gamma) * y * dt))
    f3 = float(np.sum((gamma * y - nu * z) * dt))
    return f1, f2, f3


def final_size(r0: float, x0: float, y0: float) -> float:
    """Susceptible fraction left by the unforced epidemic without demography.

    Root of ``log(x / x0) = -r0 * (x0 + y0 - x)`` in (0, x0), with z0 = 0.
    """
    if not (r0 > 0 and x0 > 0 and y0 > 0):
        raise ValueError('r0, x0 and y0 must be positive')

    def relation(x: float) -> float:
        return math.log(x / x0) + r0 * (x0 + y0 - x)

    return float(brentq(relation, 1e-300, x0, xtol=1e-15, rtol=1e-14, maxiter=500))


def export_ode(store: ArtifactStore, solution: OdeSolution, name: str = 'ode.csv') -> None:
    rows = (
        (float(t), float(x), float(y), float(z))
        for t, (x, y, z) in zip(solution.times, solution.states)
    )
    store.write_csv(name, ('t', 'x', 'y', 'z'), rows)
