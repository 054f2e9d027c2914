__version__ = '0.1.0'

from epiflux.adapters.filesystem_store import FilesystemStore
from epiflux.adapters.memory_store import InMemoryStore
from epiflux.adapters.noop_telemetry import NoopTelemetry
from epiflux.adapters.structlog_telemetry import StructlogTelemetry, configure_logging
from epiflux.config import RunConfig, StudyKind, apply_overrides, parse_config
from epiflux.domain.models import (
    EventKind,
    FluctuationSample,
    FractionState,
    GridPoint,
    ModelParams,
    PopulationState,
    RecordMode,
    SimConfig,
    StopTimes,
    Trajectory,
    Truncation,
)
from epiflux.exceptions import (
    ConfigError,
    ConfigValidationError,
    DegenerateSampleError,
    EpifluxError,
    EventBudgetExceededError,
    GridMismatchError,
    HorizonError,
    RegressionInputError,
    StateUnderflowError,
    StatisticalGateError,
    StepSizeError,
    UnknownConfigKeyError,
)
from epiflux.ports.artifact_store import ArtifactStore
from epiflux.ports.random_stream import RandomStream
from epiflux.ports.telemetry import Telemetry
from epiflux.services import (
    CovMatrix,
    DeviationReport,
    DriftVector,
    EnsembleResult,
    EnsembleSpec,
    LimitCovariance,
    NormalityReport,
    OdeSolution,
    PhiloxStream,
    RunningMoments,
    RunSummary,
    ScalingFit,
    ScalingPoint,
    apply_event,
    beta_antiderivative,
    beta_at,
    cov_matrix,
    detect_stop_times,
    deviation_report,
    drift,
    drift_integral_along_path,
    empirical_char_function,
    event_rate,
    event_rates,
    final_size,
    integrate,
    jump_covariance,
    limit_char_function,
    limit_covariance,
    normality_report,
    run_ensemble,
    sample_grid,
    scaling_point,
    scaling_regression,
    simulate,
    simulate_coupled,
    theory_ratio,
    truncated_event_rate,
    w_at_end,
    w_of_trajectory,
)
from epiflux.studies import StudyOutcome, run_study

__all__ = [
    '__version__',
    # domain
    'ModelParams',
    'PopulationState',
    'FractionState',
    'EventKind',
    'RecordMode',
    'Truncation',
    'SimConfig',
    'GridPoint',
    'StopTimes',
    'Trajectory',
    'FluctuationSample',
    # ports and adapters
    'ArtifactStore',
    'RandomStream',
    'Telemetry',
    'FilesystemStore',
    'InMemoryStore',
    'NoopTelemetry',
    'StructlogTelemetry',
    'configure_logging',
    # model core
    'beta_at',
    'beta_antiderivative',
    'event_rate',
    'event_rates',
    'truncated_event_rate',
    'apply_event',
    # simulator
    'PhiloxStream',
    'simulate',
    'simulate_coupled',
    'detect_stop_times',
    'sample_grid',
    # mean field
    'DriftVector',
    'OdeSolution',
    'drift',
    'integrate',
    'drift_integral_along_path',
    'final_size',
    # fluctuations
    'CovMatrix',
    'LimitCovariance',
    'cov_matrix',
    'jump_covariance',
    'w_of_trajectory',
    'w_at_end',
    'limit_covariance',
    'limit_char_function',
    'empirical_char_function',
    # ensembles and statistics
    'EnsembleSpec',
    'EnsembleResult',
    'RunSummary',
    'RunningMoments',
    'DeviationReport',
    'NormalityReport',
    'ScalingPoint',
    'ScalingFit',
    'run_ensemble',
    'deviation_report',
    'normality_report',
    'scaling_point',
    'scaling_regression',
    'theory_ratio',
    # studies
    'RunConfig',
    'StudyKind',
    'StudyOutcome',
    'parse_config',
    'apply_overrides',
    'run_study',
    # errors
    'EpifluxError',
    'ConfigError',
    'ConfigValidationError',
    'UnknownConfigKeyError',
    'StateUnderflowError',
    'EventBudgetExceededError',
    'HorizonError',
    'StepSizeError',
    'GridMismatchError',
    'DegenerateSampleError',
    'RegressionInputError',
    'StatisticalGateError',
]
