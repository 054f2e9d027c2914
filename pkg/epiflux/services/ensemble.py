"""Monte Carlo ensembles of independent realisations.

Realisation ``i`` uses random stream ``(seed, i)``, so an ensemble is a pure
function of its spec. Runs execute in worker processes when ``threads > 1``;
results are reordered by run index before anything is merged. Only the
requested observables survive a run; event logs are dropped in the worker.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import numpy.typing as npt

from epiflux.domain.models import (
    FluctuationSample,
    FractionState,
    GridPoint,
    PopulationState,
    RecordMode,
    SimConfig,
    Truncation,
)
from epiflux.exceptions import EventBudgetExceededError, GridMismatchError
from epiflux.ports.telemetry import Telemetry
from epiflux.services.constants import DEFAULT_ODE_STEP, PROGRESS_EVERY_RUNS
from epiflux.services.fluctuation import w_at_end, w_of_trajectory
from epiflux.services.meanfield import OdeSolution, integrate
from epiflux.services.simulator import grid_times, sample_grid, simulate, states_at


@dataclass(slots=True, frozen=True)
class EnsembleSpec:
    """What to run and what to keep.

    Attributes:
        base: template config; its ``params.n_scale`` is replaced by each entry of
            ``n_values`` (or kept when ``n_values`` is empty).
        n_runs: realisations per population size.
        initial: initial fractions, rounded to counts by largest remainder.
        n_values: strictly increasing population sizes for scaling studies.
        observe_times: times at which W_N and the state are kept; defaults to t_end.
        grid_dt: when set, every run records a grid and its sup deviation from the ODE.
        ode_step: RK4 step for the reference ODE.
        threads: worker processes; 1 runs in-process.
    """

    base: SimConfig
    n_runs: int
    initial: FractionState
    n_values: tuple[int, ...] = ()
    observe_times: tuple[float, ...] = ()
    grid_dt: float | None = None
    ode_step: float = DEFAULT_ODE_STEP
    threads: int = 1

    def __post_init__(self) -> None:
        if self.n_runs < 2:
            raise ValueError('n_runs must be >= 2')
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ValueError('n_values must be strictly increasing')
        if any(n < 1 for n in self.n_values):
            raise ValueError('n_values must be positive')
        for t in self.observe_times:
            if not 0.0 <= t <= self.base.t_end:
                raise ValueError(f'observe time {t!r} outside [0, t_end]')
        if self.grid_dt is not None and not self.grid_dt > 0:
            raise ValueError('grid_dt must be positive')
        if self.threads < 1:
            raise ValueError('threads must be >= 1')
        if self.base.truncation is Truncation.COUPLED:
            raise ValueError('ensembles run single chains; use original or truncated')

    @property
    def sizes(self) -> tuple[int, ...]:
        return self.n_values or (self.base.params.n_scale,)

    @property
    def times(self) -> tuple[float, ...]:
        return self.observe_times or (self.base.t_end,)


@dataclass(slots=True, frozen=True)
class RunSummary:
    """Observables kept from one realisation."""

    run_index: int
    n_scale: int
    final: PopulationState
    observed: tuple[tuple[float, PopulationState], ...]
    w: tuple[FluctuationSample, ...]
    sup_deviation: float | None = None
    n_events: int = 0

    def w_at(self, t: float) -> FluctuationSample:
        for sample in self.w:
            if sample.t == t:
                return sample
        raise KeyError(t)

    def state_at(self, t: float) -> PopulationState:
        for time, state in self.observed:
            if time == t:
                return state
        raise KeyError(t)


@dataclass(slots=True, frozen=True)
class EnsembleResult:
    spec: EnsembleSpec
    runs: dict[int, tuple[RunSummary, ...]]
    odes: dict[int, OdeSolution] = field(default_factory=dict)

    def for_n(self, n: int) -> tuple[RunSummary, ...]:
        return self.runs[n]


@dataclass(slots=True)
class RunningMoments:
    """Mergeable mean/variance accumulator (Welford updates, Chan merges)."""

    count: int = 0
    mean: npt.NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    m2: npt.NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def of(cls, values: Iterable[Sequence[float]]) -> RunningMoments:
        acc = cls()
        for v in values:
            acc.add(v)
        return acc

    def add(self, value: Sequence[float] | float) -> None:
        x = np.atleast_1d(np.asarray(value, dtype=np.float64))
        if self.count == 0:
            self.mean = np.zeros_like(x)
            self.m2 = np.zeros_like(x)
        self.count += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (x - self.mean)

    def merge(self, other: RunningMoments) -> RunningMoments:
        if other.count == 0:
            return RunningMoments(self.count, self.mean.copy(), self.m2.copy())
        if self.count == 0:
            return RunningMoments(other.count, other.mean.copy(), other.m2.copy())
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / count)
        m2 = self.m2 + other.m2 + delta**2 * (self.count * other.count / count)
        return RunningMoments(count, mean, m2)

    def variance(self, ddof: int = 1) -> npt.NDArray[np.float64]:
        if self.count - ddof <= 0:
            raise ValueError('not enough observations for the requested ddof')
        return self.m2 / (self.count - ddof)

    def std(self, ddof: int = 1) -> npt.NDArray[np.float64]:
        return np.sqrt(self.variance(ddof))


def sup_deviation(grid: Sequence[GridPoint], ode_states: npt.NDArray[np.float64]) -> float:
    """Sup over the grid of the max-norm distance between (S, I, R)/T and the ODE."""
    if len(grid) != len(ode_states):
        raise GridMismatchError(
            f'grid has {len(grid)} points but the ODE has {len(ode_states)}'
        )
    fracs = np.array([p.state.normalized().as_array() for p in grid], dtype=np.float64)
    return float(np.max(np.abs(fracs - ode_states))) if len(grid) else 0.0


@dataclass(slots=True, frozen=True)
class _RunTask:
    config: SimConfig
    initial: PopulationState
    times: tuple[float, ...]
    ode_on_grid: npt.NDArray[np.float64] | None


def _run_one(task: _RunTask) -> RunSummary:
    config = task.config
    params = config.params
    endpoint_only = task.times == (config.t_end,)
    try:
        traj = simulate(config, task.initial)
    except EventBudgetExceededError as exc:
        raise EventBudgetExceededError(exc.budget, exc.t, config.stream_index) from exc

    if endpoint_only:
        samples: tuple[FluctuationSample, ...] = (
            w_at_end(traj, params, run_index=config.stream_index),
        )
        observed: tuple[tuple[float, PopulationState], ...] = ((config.t_end, traj.final),)
    else:
        samples = tuple(
            replace(s, run_index=config.stream_index)
            for s in w_of_trajectory(traj, params, task.times)
        )
        points = {p.t: p.state for p in states_at(traj, task.times)}
        observed = tuple((t, points[t]) for t in task.times)

    deviation = None
    if task.ode_on_grid is not None:
        grid = traj.grid if traj.grid is not None else ()
        if config.record_mode is RecordMode.FULL_EVENT_LOG and config.grid_dt is not None:
            grid = tuple(sample_grid(traj, config.grid_dt))
        deviation = sup_deviation(grid, task.ode_on_grid)

    return RunSummary(
        run_index=config.stream_index,
        n_scale=params.n_scale,
        final=traj.final,
        observed=observed,
        w=samples,
        sup_deviation=deviation,
        n_events=traj.n_events,
    )


def _record_mode(spec: EnsembleSpec) -> RecordMode:
    if spec.times != (spec.base.t_end,):
        return RecordMode.FULL_EVENT_LOG
    if spec.grid_dt is not None:
        return RecordMode.SAMPLED_GRID
    return RecordMode.ENDPOINT_ONLY


def _tasks(
    spec: EnsembleSpec, n: int, ode: OdeSolution | None
) -> tuple[list[_RunTask], PopulationState]:
    base = spec.base
    params = replace(base.params, n_scale=n)
    initial = PopulationState.from_fractions(spec.initial.x, spec.initial.y, spec.initial.z, n)
    ode_on_grid = None
    if ode is not None and spec.grid_dt is not None:
        ode_on_grid = ode.on_grid(grid_times(base.t_end, spec.grid_dt))
    mode = _record_mode(spec)
    tasks = [
        _RunTask(
            config=replace(
                base,
                params=params,
                record_mode=mode,
                grid_dt=spec.grid_dt,
                stream_index=index,
            ),
            initial=initial,
            times=spec.times,
            ode_on_grid=ode_on_grid,
        )
        for index in range(spec.n_runs)
    ]
    return tasks, initial


def reference_ode(spec: EnsembleSpec, n: int) -> OdeSolution:
    """ODE started from the rounded initial counts scaled by N."""
    params = replace(spec.base.params, n_scale=n)
    initial = PopulationState.from_fractions(spec.initial.x, spec.initial.y, spec.initial.z, n)
    return integrate(params, initial.to_fractions(n), spec.base.t_end, spec.ode_step)


def run_ensemble(spec: EnsembleSpec, *, telemetry: Telemetry | None = None) -> EnsembleResult:
    """Run ``n_runs`` realisations for every population size of the spec.

    Raises:
        EventBudgetExceededError: carrying the offending run index.
    """
    runs: dict[int, tuple[RunSummary, ...]] = {}
    odes: dict[int, OdeSolution] = {}
    for n in spec.sizes:
        ode = reference_ode(spec, n)
        odes[n] = ode
        tasks, _ = _tasks(spec, n, ode)
        summaries: list[RunSummary] = []
        try:
            for summary in _execute(tasks, spec.threads):
                summaries.append(summary)
                if telemetry is not None and len(summaries) % PROGRESS_EVERY_RUNS == 0:
                    telemetry.record_progress(
                        'ensemble.run.progress', len(summaries), spec.n_runs, {'n_scale': n}
                    )
        except EventBudgetExceededError as exc:
            if telemetry is not None:
                telemetry.record_error(
                    'ensemble.run.error', exc, {'n_scale': n, 'run_index': exc.run_index}
                )
            raise
        summaries.sort(key=lambda s: s.run_index)
        runs[n] = tuple(summaries)
        if telemetry is not None:
            telemetry.record_event(
                'ensemble.run.ok',
                {
                    'n_scale': n,
                    'runs': len(summaries),
                    'mean_events': float(np.mean([s.n_events for s in summaries])),
                },
            )
    return EnsembleResult(spec=spec, runs=runs, odes=odes)


def _execute(tasks: list[_RunTask], threads: int) -> Iterable[RunSummary]:
    if threads <= 1 or len(tasks) <= 1:
        for task in tasks:
            yield _run_one(task)
        return
    workers = min(threads, len(tasks))
    chunk = max(1, math.ceil(len(tasks) / (workers * 4)))
    with ProcessPoolExecutor(max_workers=workers) as executor:
        yield from executor.map(_run_one, tasks, chunksize=chunk)
