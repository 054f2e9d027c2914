"""Study orchestration.

One runner per study kind. Every runner writes its data files through an
``ArtifactStore``; ``run_study`` adds ``metadata.json`` and applies the
statistical gates. Data files depend only on the config (seed included), so
reruns are byte-identical; the wall time lives in the metadata alone.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from epiflux import __version__
from epiflux.adapters.noop_telemetry import NoopTelemetry
from epiflux.config import RunConfig, StudyKind
from epiflux.domain.dto import (
    CharFunctionPointDTO,
    DeviationSummaryDTO,
    MetadataDTO,
    NormalitySummaryDTO,
    ScalingSummaryDTO,
    StopTimesDTO,
    TrajectorySummaryDTO,
)
from epiflux.domain.models import (
    FluctuationSample,
    PopulationState,
    RecordMode,
    SimConfig,
    StopTimes,
    Trajectory,
    Truncation,
)
from epiflux.exceptions import StatisticalGateError
from epiflux.ports.artifact_store import ArtifactStore
from epiflux.ports.telemetry import Telemetry
from epiflux.services._executor import run_with_telemetry
from epiflux.services.ensemble import EnsembleResult, EnsembleSpec, run_ensemble, sup_deviation
from epiflux.services.fluctuation import (
    LimitCovariance,
    char_function_gap,
    covariance_entries,
    empirical_char_function,
    empirical_covariance,
    export_sigma,
    export_w_samples,
    limit_char_function,
    limit_covariance,
)
from epiflux.services.meanfield import export_ode, integrate
from epiflux.services.simulator import (
    detect_stop_times,
    export_events,
    export_grid,
    sample_grid,
    simulate,
    simulate_coupled,
)
from epiflux.services.statistics import (
    deviation_from_summaries,
    export_histogram,
    export_normality,
    export_scaling,
    histogram,
    normality_report,
    scaling_point,
    scaling_regression,
    theory_ratio,
)

KS_P_THRESHOLD: float = 0.01
MEAN_SE_LIMIT: float = 4.0
VARIANCE_REL_LIMIT: float = 0.15
CHAR_SE_LIMIT: float = 5.0
CHAR_BIAS_ALLOWANCE: float = 0.05
SLOPE_RANGE: tuple[float, float] = (-0.6, -0.4)


@dataclass(slots=True, frozen=True)
class StudyOutcome:
    """What a study produced: the summary written to disk and any failed gates."""

    kind: StudyKind
    summary: dict[str, Any]
    gate_failures: tuple[str, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return not self.gate_failures


Runner = Callable[[RunConfig, ArtifactStore, Telemetry], StudyOutcome]


def run_study(
    config: RunConfig,
    *,
    store: ArtifactStore,
    telemetry: Telemetry | None = None,
    gate: bool = False,
) -> StudyOutcome:
    """Run the study named by ``config.study`` and write all of its artifacts.

    Raises:
        StatisticalGateError: ``gate`` is set and at least one gate failed.
        EventBudgetExceededError: a realisation ran away.
    """
    tel: Telemetry = telemetry if telemetry is not None else NoopTelemetry()
    runner = _RUNNERS[config.study]
    timed = run_with_telemetry(
        do_call=lambda: runner(config, store, tel),
        telemetry=tel,
        telemetry_name=f'study.{config.study.value}',
        attributes={'seed': config.seed, 'out': store.location()},
    )
    outcome = timed.value
    write_metadata(store, config, timed.seconds)
    if outcome.gate_failures:
        tel.record_event(
            f'study.{config.study.value}.gate',
            {'passed': False, 'failures': list(outcome.gate_failures), 'enforced': gate},
        )
        if gate:
            raise StatisticalGateError(list(outcome.gate_failures))
    return outcome


def write_metadata(store: ArtifactStore, config: RunConfig, wall_time: float) -> None:
    metadata: MetadataDTO = {
        'study': config.study.value,
        'version': __version__,
        'seed': config.seed,
        'config': config.resolved(),
        'wall_time_seconds': round(wall_time, 3),
    }
    store.write_json('metadata.json', metadata)


def _sim_config(config: RunConfig, n: int, t_end: float, record_mode: RecordMode) -> SimConfig:
    return SimConfig(
        params=config.model_params(n),
        t_end=t_end,
        seed=config.seed,
        record_mode=record_mode,
        grid_dt=config.dt if record_mode is RecordMode.SAMPLED_GRID else None,
        truncation=config.truncation,
        epsilon=config.epsilon,
        event_budget=config.event_budget,
    )


def _initial(config: RunConfig, n: int) -> PopulationState:
    return PopulationState.from_fractions(config.s0_frac, config.i0_frac, config.r0_frac, n)


def _stop_times_dto(stop: StopTimes | None) -> StopTimesDTO:
    if stop is None:
        return {'tau_n': None, 'tau_n_eps': None}
    return {'tau_n': stop.tau_n, 'tau_n_eps': stop.tau_n_eps}


def _trajectory_summary(traj: Trajectory) -> TrajectorySummaryDTO:
    return {
        'n_scale': traj.n_scale,
        't_end': traj.t_end,
        'n_events': traj.n_events,
        'n_proposals': traj.n_proposals,
        'final': list(traj.final.as_tuple()),
        'drift_integral': list(traj.drift_integral),
        'stop_times': _stop_times_dto(traj.stop_times),
    }


def _trajectory_study(
    config: RunConfig, store: ArtifactStore, telemetry: Telemetry
) -> StudyOutcome:
    n = config.n
    params = config.model_params(n)
    initial = _initial(config, n)
    ode = integrate(
        params, initial.to_fractions(n), config.t_end, config.h, telemetry=telemetry
    )
    export_ode(store, ode)

    summary: dict[str, Any] = {}
    if config.truncation is Truncation.COUPLED:
        sim = _sim_config(config, n, config.t_end, RecordMode.FULL_EVENT_LOG)
        traj, truncated = simulate_coupled(sim, initial, telemetry=telemetry)
        export_events(store, truncated, 'events_truncated.csv')
        summary['truncated'] = dict(_trajectory_summary(truncated))
        tau = traj.stop_times.tau_n if traj.stop_times else None
        summary['logs_agree_before_tau_n'] = traj.same_events(
            truncated, before=tau if tau is not None else math.inf
        )
    else:
        sim = _sim_config(config, n, config.t_end, config.record_mode)
        traj = simulate(sim, initial, telemetry=telemetry)

    summary.update(_trajectory_summary(traj))
    if traj.has_event_log:
        export_events(store, traj)
        summary['stop_times'] = dict(_stop_times_dto(detect_stop_times(traj, config.epsilon)))
        grid = sample_grid(traj, config.dt)
    else:
        grid = list(traj.grid or ())
    if grid:
        export_grid(store, grid)
        summary['sup_deviation'] = sup_deviation(grid, ode.on_grid([p.t for p in grid]))
    store.write_json('summary.json', summary)
    return StudyOutcome(StudyKind.TRAJECTORY, summary)


def _ode_study(
    config: RunConfig, store: ArtifactStore, telemetry: Telemetry
) -> StudyOutcome:
    params = config.model_params()
    ode = integrate(
        params, config.initial_fractions(), config.t_end, config.h, telemetry=telemetry
    )
    export_ode(store, ode)
    final = ode.final()
    summary = {'steps': len(ode.times) - 1, 'final': [final.x, final.y, final.z]}
    return StudyOutcome(StudyKind.ODE, summary)


def _ensemble(
    config: RunConfig,
    *,
    t_end: float,
    n_values: tuple[int, ...],
    grid_dt: float | None,
    telemetry: Telemetry,
) -> EnsembleResult:
    base = _sim_config(config, n_values[0], t_end, RecordMode.ENDPOINT_ONLY)
    if base.truncation is Truncation.COUPLED:
        base = replace(base, truncation=Truncation.ORIGINAL)
    spec = EnsembleSpec(
        base=base,
        n_runs=config.runs,
        initial=config.initial_fractions(),
        n_values=n_values,
        grid_dt=grid_dt,
        ode_step=config.h,
        threads=config.threads,
    )
    return run_ensemble(spec, telemetry=telemetry)


def _ensemble_study(
    config: RunConfig, store: ArtifactStore, telemetry: Telemetry
) -> StudyOutcome:
    result = _ensemble(
        config,
        t_end=config.t_end,
        n_values=config.n_values,
        grid_dt=config.dt,
        telemetry=telemetry,
    )
    deviation_rows: list[tuple[int, int, float]] = []
    hist_rows: list[tuple[int, float, float, int]] = []
    per_n: list[dict[str, Any]] = []
    for n in result.spec.sizes:
        summaries = result.for_n(n)
        report = deviation_from_summaries(summaries)
        deviation_rows.extend(
            (n, s.run_index, d) for s, d in zip(summaries, report.per_run)
        )
        finals = np.array([s.final.as_tuple() for s in summaries], dtype=np.float64)
        infectives = finals[:, 1]
        hist = histogram(infectives)
        hist_rows.extend(
            (n, float(lo), float(hi), int(c))
            for lo, hi, c in zip(hist.edges[:-1], hist.edges[1:], hist.counts)
        )
        dto: DeviationSummaryDTO = {
            'n_scale': n,
            'runs': len(summaries),
            'mean': report.mean,
            'q05': report.q05,
            'q50': report.q50,
            'q95': report.q95,
        }
        per_n.append({**dto, 'endpoint_mean': (finals.mean(axis=0) / n).tolist()})

    store.write_csv('deviation.csv', ('n', 'run_index', 'sup_deviation'), deviation_rows)
    store.write_csv('infectives_hist.csv', ('n', 'bin_lo', 'bin_hi', 'count'), hist_rows)

    failures: list[str] = []
    means = [entry['mean'] for entry in per_n]
    if any(b >= a for a, b in zip(means, means[1:])):
        failures.append(f'mean sup deviation is not decreasing in N: {means}')
    summary = {'t_end': config.t_end, 'dt': config.dt, 'by_n': per_n, 'gate_failures': failures}
    store.write_json('summary.json', summary)
    return StudyOutcome(StudyKind.ENSEMBLE, summary, tuple(failures))


def char_function_bound(runs: int) -> float:
    """Allowed |E exp(i theta . W) - phi| for an ensemble of ``runs`` samples."""
    return CHAR_SE_LIMIT / math.sqrt(runs) + CHAR_BIAS_ALLOWANCE


def _char_panel(
    samples: list[FluctuationSample], config: RunConfig, sigma_limit: LimitCovariance
) -> list[CharFunctionPointDTO]:
    panel: list[CharFunctionPointDTO] = []
    for theta in config.char_thetas:
        empirical = empirical_char_function(samples, theta)
        theory = limit_char_function(sigma_limit, config.observation_time, theta).real
        panel.append(
            {
                'theta': list(theta),
                'empirical_re': empirical.real,
                'empirical_im': empirical.imag,
                'theory': theory,
                'abs_error': char_function_gap(samples, sigma_limit, theta),
            }
        )
    return panel


def _fluctuation_study(
    config: RunConfig, store: ArtifactStore, telemetry: Telemetry
) -> StudyOutcome:
    t = config.observation_time
    n = config.n
    result = _ensemble(config, t_end=t, n_values=(n,), grid_dt=None, telemetry=telemetry)
    summaries = result.for_n(n)
    samples = [s.w_at(t) for s in summaries]
    sigma = limit_covariance(result.spec.base.params, result.odes[n], t)
    sigma_t = sigma.at(t)
    c = config.component
    theory_var = float(sigma_t[c - 1, c - 1])
    report = normality_report(samples, c, theory_var)

    export_w_samples(store, samples)
    export_sigma(store, sigma)
    export_normality(store, report)
    # same realisations, infective counts at the observation time
    infectives = np.array([s.state_at(t).i for s in summaries], dtype=np.float64)
    export_histogram(store, histogram(infectives), 'infectives_hist.csv')

    sample_var = report.sample_std[c - 1] ** 2
    normality: NormalitySummaryDTO = {
        'component': c,
        't': t,
        'n_scale': n,
        'runs': report.n_samples,
        'sample_mean': list(report.sample_mean),
        'sample_std': list(report.sample_std),
        'theory_var': theory_var,
        'ks_statistic': report.ks_statistic,
        'ks_p': report.ks_p,
        'fitted_mean': report.fitted_normal[0],
        'fitted_std': report.fitted_normal[1],
    }

    failures: list[str] = []
    if not report.ks_p > KS_P_THRESHOLD:
        failures.append(f'KS p-value {report.ks_p:.4g} <= {KS_P_THRESHOLD}')
    mean_c = report.sample_mean[c - 1]
    if abs(mean_c) > MEAN_SE_LIMIT * report.standard_error:
        failures.append(
            f'sample mean {mean_c:.4g} beyond {MEAN_SE_LIMIT} standard errors '
            f'({report.standard_error:.4g})'
        )
    if abs(sample_var - theory_var) > VARIANCE_REL_LIMIT * theory_var:
        failures.append(
            f'sample variance {sample_var:.4g} not within {VARIANCE_REL_LIMIT:.0%} '
            f'of {theory_var:.4g}'
        )

    entries = covariance_entries(empirical_covariance(samples), sigma_t)
    for entry in entries:
        if entry.relative_error > VARIANCE_REL_LIMIT:
            failures.append(
                f'covariance entry ({entry.i},{entry.j}) {entry.empirical:.4g} not within '
                f'{VARIANCE_REL_LIMIT:.0%} of {entry.theory:.4g}'
            )

    panel = _char_panel(samples, config, sigma)
    bound = char_function_bound(len(samples))
    for point in panel:
        if point['abs_error'] > bound:
            failures.append(
                f'characteristic function at theta={point["theta"]} off by '
                f'{point["abs_error"]:.4g} > {bound:.4g}'
            )

    summary = {
        'normality': dict(normality),
        'sample_variance': sample_var,
        'sigma_at_t': sigma_t.tolist(),
        'covariance': [
            {
                'i': e.i,
                'j': e.j,
                'empirical': e.empirical,
                'theory': e.theory,
                'relative_error': e.relative_error,
            }
            for e in entries
        ],
        'char_function': [dict(p) for p in panel],
        'char_function_bound': bound,
        'gate_failures': failures,
    }
    store.write_json('summary.json', summary)
    return StudyOutcome(StudyKind.FLUCTUATION, summary, tuple(failures))


def _scaling_study(
    config: RunConfig, store: ArtifactStore, telemetry: Telemetry
) -> StudyOutcome:
    t = config.observation_time
    result = _ensemble(
        config, t_end=t, n_values=config.n_values, grid_dt=None, telemetry=telemetry
    )
    sizes = result.spec.sizes
    points = [scaling_point(result.for_n(n), t) for n in sizes]
    fit = scaling_regression(points)
    export_scaling(store, points)

    largest = sizes[-1]
    ode = result.odes[largest]
    sigma = limit_covariance(result.spec.base.params, ode, t)
    # slope -1/2 line through the limit-theorem prediction
    theory_intercept = math.log10(theory_ratio(sigma, ode, largest, t)) + 0.5 * math.log10(
        largest
    )
    scaling: ScalingSummaryDTO = {
        'slope': fit.slope,
        'intercept': fit.intercept,
        'r2': fit.r2,
        'theory_slope': -0.5,
        'theory_intercept': theory_intercept,
        't': t,
        'runs': config.runs,
    }
    failures: list[str] = []
    lo, hi = SLOPE_RANGE
    if not lo <= fit.slope <= hi:
        failures.append(f'slope {fit.slope:.4f} outside [{lo}, {hi}]')
    summary = {
        'scaling': dict(scaling),
        'theory_ratio': [
            math.pow(10.0, theory_intercept - 0.5 * math.log10(p.n)) for p in points
        ],
        'gate_failures': failures,
    }
    store.write_json('summary.json', summary)
    return StudyOutcome(StudyKind.SCALING, summary, tuple(failures))


_RUNNERS: dict[StudyKind, Runner] = {
    StudyKind.TRAJECTORY: _trajectory_study,
    StudyKind.ODE: _ode_study,
    StudyKind.ENSEMBLE: _ensemble_study,
    StudyKind.FLUCTUATION: _fluctuation_study,
    StudyKind.SCALING: _scaling_study,
}
