"""Fluctuations around the mean-field limit.

``W_N(t) = sqrt(N) * (xi_t - xi_0 - int_0^t F(xi_s, s) ds)`` is computed from
sample paths with the exact drift integral. Its limit is a mean-zero Gaussian
with covariance ``Sigma(t) = int_0^t G(xi_s, s) ds`` taken along the ODE path,
where G is the infinitesimal covariance of the fraction process.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.integrate import cumulative_simpson

from epiflux.domain.models import (
    EventKind,
    FluctuationSample,
    FractionState,
    ModelParams,
    Trajectory,
)
from epiflux.exceptions import HorizonError
from epiflux.ports.artifact_store import ArtifactStore
from epiflux.services.constants import COVARIANCE_ENTRY_FLOOR
from epiflux.services.meanfield import OdeSolution, drift_integral_along_path
from epiflux.services.rates import beta_at, beta_grid

# Upper-triangle entries in export order.
_PAIRS: tuple[tuple[int, int], ...] = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


@dataclass(slots=True, frozen=True, eq=False)
class CovMatrix:
    """Symmetric 3x3 covariance-rate matrix with zero (1, 3) corner."""

    values: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (3, 3):
            raise ValueError('CovMatrix must be 3x3')
        if not np.array_equal(v, v.T):
            raise ValueError('CovMatrix must be symmetric')
        if v[0, 2] != 0.0:
            raise ValueError('CovMatrix corner entries must be zero')
        object.__setattr__(self, 'values', v)

    def __getitem__(self, index: tuple[int, int]) -> float:
        return float(self.values[index])

    def trace(self) -> float:
        return float(np.trace(self.values))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.values).min())


def _g_entries(
    params: ModelParams, x: float, y: float, z: float, beta: float
) -> tuple[float, float, float, float, float]:
    mass = x + y + z
    if mass <= 0.0:
        return 0.0, 0.0, 0.0, 0.0, 0.0
    nu = params.nu
    gamma = params.gamma
    force = beta * x * y / mass
    return (
        nu * (2.0 * x + y + z) + force,
        -force,
        force + (nu + gamma) * y,
        -gamma * y,
        nu * z + gamma * y,
    )


def cov_matrix(params: ModelParams, state: FractionState, t: float) -> CovMatrix:
    """Infinitesimal covariance G(state, t); zero matrix at zero mass."""
    g11, g12, g22, g23, g33 = _g_entries(params, state.x, state.y, state.z, beta_at(params, t))
    return CovMatrix(
        np.array(
            [[g11, g12, 0.0], [g12, g22, g23], [0.0, g23, g33]],
            dtype=np.float64,
        )
    )


def jump_covariance(params: ModelParams, state: FractionState, t: float) -> CovMatrix:
    """G assembled as the rate-weighted sum of jump outer products over all events."""
    x, y, z = state.x, state.y, state.z
    mass = x + y + z
    force = beta_at(params, t) * x * y / mass if mass > 0 else 0.0
    rates = {
        EventKind.BIRTH: params.nu * mass,
        EventKind.SUSCEPTIBLE_DEATH: params.nu * x,
        EventKind.INFECTION: force,
        EventKind.RECOVERY: params.gamma * y,
        EventKind.INFECTIOUS_DEATH: params.nu * y,
        EventKind.RECOVERED_DEATH: params.nu * z,
    }
    total = np.zeros((3, 3), dtype=np.float64)
    for kind, rate in rates.items():
        jump = np.array(kind.jump, dtype=np.float64)
        total += rate * np.outer(jump, jump)
    return CovMatrix(total)


def _scaled_state(counts: tuple[int, int, int], n: int) -> npt.NDArray[np.float64]:
    return np.array(counts, dtype=np.float64) / n


def w_of_trajectory(
    traj: Trajectory, params: ModelParams, times: Sequence[float]
) -> list[FluctuationSample]:
    """W_N at each requested time, using the exact drift integral along the path.

    Raises:
        HorizonError: a requested time lies outside [0, t_end].
    """
    if not traj.has_event_log:
        raise ValueError('trajectory was recorded without an event log')
    n = params.n_scale
    root_n = math.sqrt(n)
    xi0 = _scaled_state(traj.initial.as_tuple(), n)
    samples: list[FluctuationSample] = []
    for t in times:
        if t < 0.0 or t > traj.t_end:
            raise HorizonError(t, traj.t_end)
        k = int(np.searchsorted(traj.event_times, t, side='right'))
        if k == 0:
            xi_t = xi0
        else:
            state = _counts_after(traj, k)
            xi_t = _scaled_state(state, n)
        drift_part = np.array(drift_integral_along_path(params, traj, t), dtype=np.float64)
        w = root_n * (xi_t - xi0 - drift_part)
        samples.append(FluctuationSample(t=float(t), w=_triple(w), n_scale=n))
    return samples


def _counts_after(traj: Trajectory, n_applied: int) -> tuple[int, int, int]:
    """Counts after the first ``n_applied`` events of the log."""
    s, i, r = traj.initial.as_tuple()
    kinds = traj.event_kinds[:n_applied]
    counts = np.bincount(kinds.astype(np.int64), minlength=len(EventKind))
    for kind in EventKind:
        ds, di, dr = kind.jump
        c = int(counts[kind])
        s, i, r = s + ds * c, i + di * c, r + dr * c
    return s, i, r


def w_at_end(traj: Trajectory, params: ModelParams, run_index: int = 0) -> FluctuationSample:
    """W_N(t_end) from the drift integral accumulated during simulation."""
    n = params.n_scale
    xi0 = _scaled_state(traj.initial.as_tuple(), n)
    xi_t = _scaled_state(traj.final.as_tuple(), n)
    w = math.sqrt(n) * (xi_t - xi0 - np.array(traj.drift_integral, dtype=np.float64))
    return FluctuationSample(t=traj.t_end, w=_triple(w), n_scale=n, run_index=run_index)


def _triple(w: npt.NDArray[np.float64]) -> tuple[float, float, float]:
    return float(w[0]), float(w[1]), float(w[2])


@dataclass(slots=True, frozen=True, eq=False)
class LimitCovariance:
    """Sigma(t) on a time grid; ``sigma`` has shape (n, 3, 3)."""

    times: npt.NDArray[np.float64]
    sigma: npt.NDArray[np.float64]
    step: float

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def at(self, t: float) -> npt.NDArray[np.float64]:
        if t < 0.0 or t > self.t_end + 1e-12:
            raise HorizonError(t, self.t_end)
        flat = self.sigma.reshape(len(self.times), 9)
        out = np.array([np.interp(t, self.times, flat[:, k]) for k in range(9)])
        return out.reshape(3, 3)


def g_along(
    params: ModelParams, times: npt.NDArray[np.float64], states: npt.NDArray[np.float64]
) -> npt.NDArray[np.float64]:
    """G evaluated along a state path, shape (n, 3, 3)."""
    x, y, z = states[:, 0], states[:, 1], states[:, 2]
    mass = x + y + z
    with np.errstate(invalid='ignore', divide='ignore'):
        force = np.where(mass > 0, beta_grid(params, times) * x * y / mass, 0.0)
    nu = params.nu
    gamma = params.gamma
    live = mass > 0
    g = np.zeros((len(times), 3, 3), dtype=np.float64)
    g[:, 0, 0] = np.where(live, nu * (2.0 * x + y + z) + force, 0.0)
    g[:, 0, 1] = g[:, 1, 0] = -force
    g[:, 1, 1] = np.where(live, force + (nu + gamma) * y, 0.0)
    g[:, 1, 2] = g[:, 2, 1] = np.where(live, -gamma * y, 0.0)
    g[:, 2, 2] = np.where(live, nu * z + gamma * y, 0.0)
    return g


def limit_covariance(params: ModelParams, ode: OdeSolution, t_end: float) -> LimitCovariance:
    """Sigma(t) = int_0^t G(xi_s, s) ds by cumulative composite Simpson on the ODE grid."""
    if t_end > ode.t_end + 1e-12:
        raise HorizonError(t_end, ode.t_end)
    keep = ode.times <= t_end + 1e-12
    times = ode.times[keep]
    states = ode.states[keep]
    if t_end - times[-1] > 1e-12:
        times = np.append(times, t_end)
        states = np.vstack([states, ode.on_grid([t_end])])
    g = g_along(params, times, states)
    if len(times) < 2:
        sigma = np.zeros((len(times), 3, 3), dtype=np.float64)
    else:
        sigma = cumulative_simpson(g, x=times, axis=0, initial=0.0)
        # Re-symmetrise against rounding in the two triangle copies.
        sigma = 0.5 * (sigma + np.transpose(sigma, (0, 2, 1)))
        sigma[:, 0, 2] = sigma[:, 2, 0] = 0.0
    return LimitCovariance(times=times, sigma=sigma, step=ode.step)


def limit_char_function(sigma: LimitCovariance, t: float, theta: Sequence[float]) -> complex:
    """exp(-1/2 theta' Sigma(t) theta), the limit law's characteristic function."""
    th = np.asarray(theta, dtype=np.float64)
    quad = float(th @ sigma.at(t) @ th)
    return complex(math.exp(-0.5 * quad), 0.0)


def empirical_char_function(
    samples: Iterable[FluctuationSample], theta: Sequence[float]
) -> complex:
    """Monte Carlo estimate of E exp(i theta . W)."""
    w = np.array([s.w for s in samples], dtype=np.float64)
    if w.size == 0:
        raise ValueError('at least one sample is required')
    phase = w @ np.asarray(theta, dtype=np.float64)
    return complex(np.mean(np.exp(1j * phase)))


def char_function_gap(
    samples: Sequence[FluctuationSample], sigma: LimitCovariance, theta: Sequence[float]
) -> float:
    """|E exp(i theta . W) - phi_t(theta)| at the samples' common time."""
    if not samples:
        raise ValueError('at least one sample is required')
    t = samples[0].t
    return abs(empirical_char_function(samples, theta) - limit_char_function(sigma, t, theta))


def empirical_covariance(samples: Sequence[FluctuationSample]) -> npt.NDArray[np.float64]:
    """Unbiased 3x3 sample covariance of W."""
    if len(samples) < 2:
        raise ValueError('at least two samples are required')
    w = np.array([s.w for s in samples], dtype=np.float64)
    return np.cov(w, rowvar=False, ddof=1)


@dataclass(slots=True, frozen=True)
class CovarianceEntry:
    """One compared entry (1-based indices) of the empirical covariance against Sigma."""

    i: int
    j: int
    empirical: float
    theory: float

    @property
    def relative_error(self) -> float:
        return abs(self.empirical - self.theory) / abs(self.theory)


def covariance_entries(
    empirical: npt.NDArray[np.float64],
    theory: npt.NDArray[np.float64],
    floor: float = COVARIANCE_ENTRY_FLOOR,
) -> list[CovarianceEntry]:
    """Upper-triangle entries whose theory value exceeds ``floor`` times the largest one."""
    cutoff = floor * float(np.abs(theory).max())
    return [
        CovarianceEntry(i + 1, j + 1, float(empirical[i, j]), float(theory[i, j]))
        for i, j in _PAIRS
        if abs(theory[i, j]) > cutoff
    ]


def export_sigma(store: ArtifactStore, sigma: LimitCovariance, name: str = 'sigma.csv') -> None:
    rows = (
        (float(t), *(float(m[i, j]) for i, j in _PAIRS))
        for t, m in zip(sigma.times, sigma.sigma)
    )
    store.write_csv(name, ('t', 's11', 's12', 's13', 's22', 's23', 's33'), rows)


def export_w_samples(
    store: ArtifactStore, samples: Iterable[FluctuationSample], name: str = 'w_samples.csv'
) -> None:
    rows = ((s.run_index, s.t, *s.w) for s in samples)
    store.write_csv(name, ('run_index', 't', 'w1', 'w2', 'w3'), rows)
