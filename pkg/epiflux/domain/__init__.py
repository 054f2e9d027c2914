"""Domain layer: pure entities and value objects."""

from .models import (
    DEFAULT_EVENT_BUDGET,
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

__all__ = [
    'DEFAULT_EVENT_BUDGET',
    'EventKind',
    'FluctuationSample',
    'FractionState',
    'GridPoint',
    'ModelParams',
    'PopulationState',
    'RecordMode',
    'SimConfig',
    'StopTimes',
    'Trajectory',
    'Truncation',
]
