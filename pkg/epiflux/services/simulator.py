"""Exact simulation of the seasonally forced SIR chain.

The per-individual Poisson clocks of the graphical construction are
aggregated: one exponential waiting time per proposal at the bounding total
rate, a channel picked proportionally to its bound, and only the infection
channel thinned by ``U < beta(t) / beta_max``. The coupled mode drives the
original and the truncated chain from the same proposals, so their event logs
agree exactly until the total first exceeds 2N.
"""

from __future__ import annotations

import math
from array import array
from collections.abc import Sequence

import numpy as np
import numpy.typing as npt

from epiflux.domain.models import (
    EventKind,
    GridPoint,
    ModelParams,
    PopulationState,
    RecordMode,
    SimConfig,
    StopTimes,
    Trajectory,
    Truncation,
)
from epiflux.exceptions import EventBudgetExceededError, StateUnderflowError
from epiflux.ports.artifact_store import ArtifactStore
from epiflux.ports.random_stream import RandomStream
from epiflux.ports.telemetry import Telemetry
from epiflux.services.rates import acceptance_ratio, beta_antiderivative
from epiflux.services.rng import PhiloxStream

_INFECTION: int = int(EventKind.INFECTION)
_JUMPS: tuple[tuple[int, int, int], ...] = tuple(kind.jump for kind in EventKind)
JUMP_MATRIX: npt.NDArray[np.int64] = np.array(_JUMPS, dtype=np.int64)

Bounds = tuple[float, float, float, float, float, float]


def grid_times(t_end: float, dt: float) -> list[float]:
    """Grid 0, dt, 2dt, ... up to the largest multiple of dt not beyond t_end."""
    if not dt > 0:
        raise ValueError('dt must be positive')
    count = math.floor(t_end / dt + 1e-9)
    return [min(k * dt, t_end) for k in range(count + 1)]


def _bounds(params: ModelParams, s: int, i: int, r: int, cap: int | None) -> Bounds:
    """Per-channel bounding rates; exact rates for every channel but infection."""
    total = s + i + r
    if cap is not None:
        s_eff, i_eff, r_eff, t_eff = min(s, cap), min(i, cap), min(r, cap), min(total, cap)
    else:
        s_eff, i_eff, r_eff, t_eff = s, i, r, total
    nu = params.nu
    infection = params.beta_max * s_eff * i / total if total > 0 else 0.0
    return (
        nu * t_eff,
        nu * s_eff,
        infection,
        params.gamma * i_eff,
        nu * i_eff,
        nu * r_eff,
    )


def _pick(bounds: Sequence[float], u: float) -> int:
    acc = 0.0
    last = -1
    for k, b in enumerate(bounds):
        if b > 0.0:
            acc += b
            last = k
            if u < acc:
                return k
    # u rounded up to the total
    return last


class _PathRecorder:
    """Mutable per-path state: counts, drift integral, log, grid and stop times."""

    __slots__ = (
        's',
        'i',
        'r',
        'n_events',
        'tau_n',
        'tau_n_eps',
        '_params',
        '_n',
        '_t_last',
        '_b_last',
        '_d1',
        '_d2',
        '_d3',
        '_keep_log',
        '_times',
        '_kinds',
        '_grid_times',
        '_grid',
        '_gi',
        '_two_n',
        '_band',
    )

    def __init__(
        self,
        params: ModelParams,
        initial: PopulationState,
        *,
        keep_log: bool,
        grid: list[float] | None,
        epsilon: float,
    ) -> None:
        self.s, self.i, self.r = initial.as_tuple()
        self.n_events = 0
        self._params = params
        self._n = params.n_scale
        self._t_last = 0.0
        self._b_last = 0.0
        self._d1 = self._d2 = self._d3 = 0.0
        self._keep_log = keep_log
        self._times: array[float] = array('d')
        self._kinds: array[int] = array('b')
        self._grid_times = grid
        self._grid: list[GridPoint] = []
        self._gi = 0
        self._two_n = 2 * self._n
        self._band = epsilon * self._n
        total = initial.total()
        self.tau_n: float | None = 0.0 if total > self._two_n else None
        self.tau_n_eps: float | None = 0.0 if abs(total - self._n) > self._band else None

    def _integrate_to(self, t: float) -> None:
        dt = t - self._t_last
        if dt <= 0.0:
            return
        params = self._params
        b = beta_antiderivative(params, t)
        db = b - self._b_last
        n = self._n
        s, i, r = self.s, self.i, self.r
        total = s + i + r
        y = i / n
        z = r / n
        force = s * i / (n * total) if total > 0 else 0.0
        nu = params.nu
        gamma = params.gamma
        self._d1 += nu * (y + z) * dt - db * force
        self._d2 += db * force - (nu + gamma) * y * dt
        self._d3 += (gamma * y - nu * z) * dt
        self._t_last = t
        self._b_last = b

    def _emit_grid_before(self, t: float) -> None:
        times = self._grid_times
        if times is None:
            return
        gi = self._gi
        if gi < len(times) and times[gi] < t:
            state = PopulationState(self.s, self.i, self.r)
            while gi < len(times) and times[gi] < t:
                self._grid.append(GridPoint(times[gi], state))
                gi += 1
            self._gi = gi

    def jump(self, t: float, kind: int) -> None:
        self._emit_grid_before(t)
        self._integrate_to(t)
        ds, di, dr = _JUMPS[kind]
        s, i, r = self.s + ds, self.i + di, self.r + dr
        if s < 0 or i < 0 or r < 0:
            raise StateUnderflowError(EventKind(kind).label, (self.s, self.i, self.r))
        self.s, self.i, self.r = s, i, r
        self.n_events += 1
        if self._keep_log:
            self._times.append(t)
            self._kinds.append(kind)
        total = s + i + r
        if self.tau_n is None and total > self._two_n:
            self.tau_n = t
        if self.tau_n_eps is None and abs(total - self._n) > self._band:
            self.tau_n_eps = t

    def finish(self, initial: PopulationState, t_end: float, n_proposals: int) -> Trajectory:
        self._emit_grid_before(math.inf)
        self._integrate_to(t_end)
        return Trajectory(
            initial=initial,
            final=PopulationState(self.s, self.i, self.r),
            t_end=t_end,
            n_scale=self._n,
            drift_integral=(self._d1, self._d2, self._d3),
            event_times=np.array(self._times, dtype=np.float64),
            event_kinds=np.array(self._kinds, dtype=np.int8),
            has_event_log=self._keep_log,
            grid=tuple(self._grid) if self._grid_times is not None else None,
            stop_times=StopTimes(self.tau_n, self.tau_n_eps),
            n_events=self.n_events,
            n_proposals=n_proposals,
        )


def _recorder(config: SimConfig, initial: PopulationState, *, keep_log: bool) -> _PathRecorder:
    grid = None
    if config.record_mode is RecordMode.SAMPLED_GRID and config.grid_dt is not None:
        grid = grid_times(config.t_end, config.grid_dt)
    return _PathRecorder(
        config.params, initial, keep_log=keep_log, grid=grid, epsilon=config.epsilon
    )


def _check_inputs(initial: PopulationState) -> None:
    if initial.total() <= 0:
        raise ValueError('initial population must be non-empty')


def _run_single(
    config: SimConfig, initial: PopulationState, stream: RandomStream, *, truncated: bool
) -> Trajectory:
    params = config.params
    cap = 2 * params.n_scale if truncated else None
    t_end = config.t_end
    budget = config.event_budget
    path = _recorder(
        config, initial, keep_log=config.record_mode is RecordMode.FULL_EVENT_LOG
    )
    t = 0.0
    proposals = 0
    while True:
        bounds = _bounds(params, path.s, path.i, path.r, cap)
        total_rate = sum(bounds)
        if total_rate <= 0.0:
            break
        t += stream.exponential(total_rate)
        if t > t_end:
            break
        proposals += 1
        kind = _pick(bounds, stream.uniform() * total_rate)
        if kind == _INFECTION and not stream.uniform() < acceptance_ratio(params, t):
            continue
        if path.n_events >= budget:
            raise EventBudgetExceededError(budget, t)
        path.jump(t, kind)
    return path.finish(initial, t_end, proposals)


def _run_coupled(
    config: SimConfig, initial: PopulationState, stream: RandomStream
) -> tuple[Trajectory, Trajectory]:
    params = config.params
    cap = 2 * params.n_scale
    t_end = config.t_end
    budget = config.event_budget
    original = _recorder(config, initial, keep_log=True)
    truncated = _recorder(config, initial, keep_log=True)
    t = 0.0
    proposals = 0
    while True:
        b_orig = _bounds(params, original.s, original.i, original.r, None)
        b_trunc = _bounds(params, truncated.s, truncated.i, truncated.r, cap)
        bounds = tuple(max(a, b) for a, b in zip(b_orig, b_trunc))
        total_rate = sum(bounds)
        if total_rate <= 0.0:
            break
        t += stream.exponential(total_rate)
        if t > t_end:
            break
        proposals += 1
        kind = _pick(bounds, stream.uniform() * total_rate)
        # Strict comparison: a channel whose rate is zero never fires.
        u = stream.uniform() * bounds[kind]
        scale = acceptance_ratio(params, t) if kind == _INFECTION else 1.0
        fire_orig = u < b_orig[kind] * scale
        fire_trunc = u < b_trunc[kind] * scale
        if fire_orig or fire_trunc:
            if max(original.n_events, truncated.n_events) >= budget:
                raise EventBudgetExceededError(budget, t)
            if fire_orig:
                original.jump(t, kind)
            if fire_trunc:
                truncated.jump(t, kind)
    return (
        original.finish(initial, t_end, proposals),
        truncated.finish(initial, t_end, proposals),
    )


def simulate(
    config: SimConfig,
    initial: PopulationState,
    *,
    stream: RandomStream | None = None,
    telemetry: Telemetry | None = None,
) -> Trajectory:
    """Generate one exact realisation of the original or truncated chain.

    The random stream defaults to ``(config.seed, config.stream_index)``, so an
    identical config yields a bit-identical trajectory.

    Raises:
        EventBudgetExceededError: more than ``config.event_budget`` events fired.
    """
    _check_inputs(initial)
    if config.truncation is Truncation.COUPLED:
        raise ValueError('coupled configs must be run with simulate_coupled')
    rng = stream if stream is not None else PhiloxStream(config.seed, config.stream_index)
    traj = _run_single(
        config, initial, rng, truncated=config.truncation is Truncation.TRUNCATED
    )
    if telemetry is not None:
        telemetry.record_event(
            'simulator.simulate.ok',
            {
                'n_scale': config.params.n_scale,
                'n_events': traj.n_events,
                'n_proposals': traj.n_proposals,
                'truncation': config.truncation.value,
            },
        )
    return traj


def simulate_coupled(
    config: SimConfig,
    initial: PopulationState,
    *,
    stream: RandomStream | None = None,
    telemetry: Telemetry | None = None,
) -> tuple[Trajectory, Trajectory]:
    """Run the original and the truncated chain on shared proposals.

    Returns ``(original, truncated)``; both carry full event logs and stop times.
    """
    _check_inputs(initial)
    if config.truncation is not Truncation.COUPLED:
        raise ValueError('simulate_coupled requires truncation=coupled')
    rng = stream if stream is not None else PhiloxStream(config.seed, config.stream_index)
    original, truncated = _run_coupled(config, initial, rng)
    if telemetry is not None:
        telemetry.record_event(
            'simulator.simulate_coupled.ok',
            {
                'n_scale': config.params.n_scale,
                'tau_n': original.stop_times.tau_n if original.stop_times else None,
                'n_events_original': original.n_events,
                'n_events_truncated': truncated.n_events,
            },
        )
    return original, truncated


def _require_log(traj: Trajectory) -> None:
    if not traj.has_event_log:
        raise ValueError('trajectory was recorded without an event log')


def _count_path(traj: Trajectory) -> npt.NDArray[np.int64]:
    """Counts after each event, shape (n_events, 3)."""
    jumps = JUMP_MATRIX[traj.event_kinds.astype(np.int64)]
    start = np.array(traj.initial.as_tuple(), dtype=np.int64)
    return start + np.cumsum(jumps, axis=0)


def detect_stop_times(traj: Trajectory, epsilon: float) -> StopTimes:
    """First event times with total > 2N, and with |total - N| > epsilon * N.

    A trajectory that starts beyond a threshold has that stop time equal to 0.
    """
    _require_log(traj)
    n = traj.n_scale
    initial_total = traj.initial.total()
    totals = _count_path(traj).sum(axis=1) if traj.n_events else np.empty(0, dtype=np.int64)

    def first(initially: bool, mask: npt.NDArray[np.bool_]) -> float | None:
        if initially:
            return 0.0
        hits = np.flatnonzero(mask)
        return float(traj.event_times[hits[0]]) if hits.size else None

    tau_n = first(initial_total > 2 * n, totals > 2 * n)
    tau_eps = first(
        abs(initial_total - n) > epsilon * n, np.abs(totals - n) > epsilon * n
    )
    return StopTimes(tau_n, tau_eps)


def sample_grid(traj: Trajectory, dt: float) -> list[GridPoint]:
    """Piecewise-constant evaluation on 0, dt, 2dt, ...; an event at a grid time counts."""
    return states_at(traj, grid_times(traj.t_end, dt))


def states_at(traj: Trajectory, times: Sequence[float]) -> list[GridPoint]:
    """State at each time, counting events that fire exactly at that time."""
    _require_log(traj)
    if traj.n_events == 0:
        return [GridPoint(t, traj.initial) for t in times]
    counts = _count_path(traj)
    idx = np.searchsorted(traj.event_times, np.asarray(times), side='right')
    out: list[GridPoint] = []
    for t, k in zip(times, idx.tolist()):
        if k == 0:
            out.append(GridPoint(t, traj.initial))
        else:
            s, i, r = counts[k - 1].tolist()
            out.append(GridPoint(t, PopulationState(s, i, r)))
    return out


def export_events(store: ArtifactStore, traj: Trajectory, name: str = 'events.csv') -> None:
    _require_log(traj)
    rows = (
        (t, EventKind(kind).label, state.s, state.i, state.r)
        for (t, state), kind in zip(traj.states(), traj.event_kinds.tolist())
    )
    store.write_csv(name, ('t', 'kind', 's', 'i', 'r'), rows)


def export_grid(store: ArtifactStore, grid: Sequence[GridPoint], name: str = 'grid.csv') -> None:
    def rows() -> list[tuple[float, int, int, int, float, float, float]]:
        out = []
        for t, state in grid:
            frac = state.normalized()
            out.append((t, state.s, state.i, state.r, frac.x, frac.y, frac.z))
        return out

    store.write_csv(name, ('t', 's', 'i', 'r', 'x', 'y', 'z'), rows())
