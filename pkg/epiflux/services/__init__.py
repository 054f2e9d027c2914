"""Numerical services: simulation, mean-field limit, fluctuations and statistics."""

from .ensemble import (
    EnsembleResult,
    EnsembleSpec,
    RunningMoments,
    RunSummary,
    reference_ode,
    run_ensemble,
    sup_deviation,
)
from .fluctuation import (
    CovarianceEntry,
    CovMatrix,
    LimitCovariance,
    char_function_gap,
    cov_matrix,
    covariance_entries,
    empirical_covariance,
    empirical_char_function,
    jump_covariance,
    limit_char_function,
    limit_covariance,
    w_at_end,
    w_of_trajectory,
)
from .meanfield import (
    DriftVector,
    OdeSolution,
    drift,
    drift_integral_along_path,
    final_size,
    integrate,
)
from .rates import (
    acceptance_ratio,
    apply_event,
    beta_antiderivative,
    beta_at,
    event_rate,
    event_rates,
    truncated_event_rate,
)
from .rng import PhiloxStream, stream_for
from .simulator import (
    detect_stop_times,
    grid_times,
    sample_grid,
    simulate,
    simulate_coupled,
    states_at,
)
from .statistics import (
    DeviationReport,
    NormalityReport,
    ScalingFit,
    ScalingPoint,
    deviation_from_summaries,
    deviation_report,
    freedman_diaconis_bins,
    histogram,
    normality_report,
    scaling_point,
    scaling_regression,
    theory_ratio,
)

__all__ = [
    'beta_at',
    'acceptance_ratio',
    'beta_antiderivative',
    'event_rate',
    'event_rates',
    'truncated_event_rate',
    'apply_event',
    'PhiloxStream',
    'stream_for',
    'simulate',
    'simulate_coupled',
    'detect_stop_times',
    'sample_grid',
    'states_at',
    'grid_times',
    'DriftVector',
    'OdeSolution',
    'drift',
    'integrate',
    'drift_integral_along_path',
    'final_size',
    'CovMatrix',
    'CovarianceEntry',
    'char_function_gap',
    'covariance_entries',
    'empirical_covariance',
    'LimitCovariance',
    'cov_matrix',
    'jump_covariance',
    'w_of_trajectory',
    'w_at_end',
    'limit_covariance',
    'limit_char_function',
    'empirical_char_function',
    'EnsembleSpec',
    'EnsembleResult',
    'RunSummary',
    'RunningMoments',
    'run_ensemble',
    'reference_ode',
    'sup_deviation',
    'DeviationReport',
    'NormalityReport',
    'ScalingPoint',
    'ScalingFit',
    'deviation_report',
    'deviation_from_summaries',
    'normality_report',
    'scaling_point',
    'scaling_regression',
    'theory_ratio',
    'freedman_diaconis_bins',
    'histogram',
]
