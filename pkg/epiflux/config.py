"""Study configuration: strict JSON schema, defaults and override precedence.

A config document is one flat JSON object. Model parameters and initial
fractions are required top-level keys (``beta0``, ``beta1``, ``gamma``,
``nu``, ``s0_frac``, ``i0_frac``, optional ``r0_frac``); everything else is
a study option with a documented default.

Precedence: CLI flags > environment (``EPIFLUX_THREADS`` only) > file > defaults.
"""

from __future__ import annotations

import json
import logging
import os
from collections.abc import Mapping
from enum import Enum
from typing import Any, NoReturn

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    ValidationInfo,
    field_validator,
)

from epiflux.domain.models import (
    DEFAULT_EVENT_BUDGET,
    FractionState,
    ModelParams,
    RecordMode,
    Truncation,
)
from epiflux.exceptions import ConfigError, ConfigValidationError, UnknownConfigKeyError
from epiflux.services.constants import DEFAULT_GRID_DT, DEFAULT_ODE_STEP, DEFAULT_RUNS

logger = logging.getLogger(__name__)

ENV_THREADS = 'EPIFLUX_THREADS'
ENV_LOG_LEVEL = 'EPIFLUX_LOG_LEVEL'

# Half-decade steps from 10^3 to 10^5, rounded to the nearest integer.
DEFAULT_N_VALUES: tuple[int, ...] = tuple(round(10 ** (3 + k / 2)) for k in range(5))
DEFAULT_OBSERVE_T = 1.0

DEFAULT_CHAR_THETAS: tuple[tuple[float, float, float], ...] = (
    (0.0, 1.0, 0.0),
    (0.0, 2.0, 0.0),
    (0.0, 3.0, 0.0),
    (1.0, 0.0, 0.0),
    (2.0, 0.0, 0.0),
    (3.0, 0.0, 0.0),
    (0.0, 0.0, 1.0),
    (0.0, 0.0, 2.0),
    (0.0, 0.0, 3.0),
    (1.0, 1.0, 0.0),
    (1.0, -1.0, 0.0),
    (0.0, 1.0, 1.0),
    (0.0, 1.0, -1.0),
    (1.0, 0.0, 1.0),
    (1.0, 1.0, 1.0),
    (1.0, -1.0, 0.5),
    (-1.0, 2.0, 0.0),
    (2.0, -1.0, 1.0),
    (0.5, -2.0, 1.0),
    (-1.0, -1.0, -1.0),
)


class StudyKind(str, Enum):
    TRAJECTORY = 'trajectory'
    ODE = 'ode'
    ENSEMBLE = 'ensemble'
    FLUCTUATION = 'fluctuation'
    SCALING = 'scaling'


# CLI subcommand -> study kind
SUBCOMMANDS: dict[str, StudyKind] = {
    'simulate': StudyKind.TRAJECTORY,
    'ode': StudyKind.ODE,
    'ensemble': StudyKind.ENSEMBLE,
    'fluctuation': StudyKind.FLUCTUATION,
    'scaling': StudyKind.SCALING,
}


class RunConfig(BaseModel):
    """Parsed, validated study configuration."""

    model_config = ConfigDict(extra='forbid', frozen=True)

    # model
    beta0: float = Field(ge=0)
    beta1: float = Field(ge=0, lt=1)
    gamma: float = Field(ge=0)
    nu: float = Field(ge=0)
    s0_frac: float = Field(ge=0, le=1)
    i0_frac: float = Field(ge=0, le=1)
    r0_frac: float = Field(default=0.0, ge=0, le=1, validate_default=True)

    # study
    study: StudyKind = StudyKind.TRAJECTORY
    n: int = Field(default=10_000, ge=1)
    t_end: float = Field(default=2.0, gt=0)
    h: float = Field(default=DEFAULT_ODE_STEP, gt=0)
    dt: float = Field(default=DEFAULT_GRID_DT, gt=0)
    runs: int = Field(default=DEFAULT_RUNS, ge=2)
    n_values: tuple[int, ...] = DEFAULT_N_VALUES
    observe_t: float | None = Field(default=None, gt=0)
    component: int = Field(default=2, ge=1, le=3)
    epsilon: float = Field(default=0.05, gt=0)
    record_mode: RecordMode = RecordMode.FULL_EVENT_LOG
    truncation: Truncation = Truncation.ORIGINAL
    event_budget: int = Field(default=DEFAULT_EVENT_BUDGET, ge=1)
    char_thetas: tuple[tuple[float, float, float], ...] = DEFAULT_CHAR_THETAS

    # run
    seed: int = Field(default=20240601, ge=0, lt=2**64)
    out: str = 'epiflux-out'
    threads: int = Field(default=1, ge=1)

    @field_validator('r0_frac')
    @classmethod
    def _fractions_sum_to_one(cls, value: float, info: ValidationInfo) -> float:
        s0, i0 = info.data.get('s0_frac'), info.data.get('i0_frac')
        if s0 is not None and i0 is not None and abs(s0 + i0 + value - 1.0) > 1e-9:
            raise ValueError('s0_frac + i0_frac + r0_frac must equal 1')
        return value

    @field_validator('n_values')
    @classmethod
    def _increasing_sizes(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if any(v < 1 for v in value):
            raise ValueError('population sizes must be positive')
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError('population sizes must be strictly increasing')
        return value

    @field_validator('h')
    @classmethod
    def _step_within_horizon(cls, value: float, info: ValidationInfo) -> float:
        t_end = info.data.get('t_end')
        if t_end is not None and value > t_end:
            raise ValueError('h must not exceed t_end')
        return value

    @field_validator('observe_t')
    @classmethod
    def _observe_within_horizon(cls, value: float | None, info: ValidationInfo) -> float | None:
        if value is None:
            return value
        t_end, h = info.data.get('t_end'), info.data.get('h')
        if t_end is not None and value > t_end:
            raise ValueError('observe_t must not exceed t_end')
        if h is not None and value < h:
            raise ValueError('observe_t must be at least one ODE step h')
        return value

    def model_params(self, n_scale: int | None = None) -> ModelParams:
        return ModelParams(
            nu=self.nu,
            gamma=self.gamma,
            beta0=self.beta0,
            beta1=self.beta1,
            n_scale=self.n if n_scale is None else n_scale,
        )

    def initial_fractions(self) -> FractionState:
        return FractionState(self.s0_frac, self.i0_frac, self.r0_frac)

    @property
    def observation_time(self) -> float:
        """Explicit ``observe_t``, else 1 year clipped to the horizon."""
        if self.observe_t is not None:
            return self.observe_t
        return min(DEFAULT_OBSERVE_T, self.t_end)

    def resolved(self) -> dict[str, Any]:
        """Every field including defaults, JSON-ready; echoed into metadata."""
        data = self.model_dump(mode='json')
        data['observe_t'] = self.observation_time
        return data


def _field_of(error: Mapping[str, Any]) -> str:
    loc = error.get('loc') or ()
    return '.'.join(str(part) for part in loc) or 'config'


def _raise_from_validation(exc: ValidationError) -> NoReturn:
    errors = exc.errors()
    for error in errors:
        if error.get('type') == 'extra_forbidden':
            raise UnknownConfigKeyError(_field_of(error)) from exc
    # report bad values ahead of missing keys
    first = next((e for e in errors if e.get('type') != 'missing'), errors[0])
    raise ConfigValidationError(_field_of(first), str(first.get('msg', 'invalid value'))) from exc


def validate_config(data: Mapping[str, Any]) -> RunConfig:
    """Validate an already-decoded mapping.

    Raises:
        UnknownConfigKeyError: a key is not part of the schema.
        ConfigValidationError: a value is out of its documented domain.
    """
    try:
        return RunConfig.model_validate(dict(data))
    except ValidationError as exc:
        _raise_from_validation(exc)


def parse_config(text: str) -> RunConfig:
    """Parse a JSON config document with strict key checking.

    Raises:
        ConfigError: malformed JSON (with line and column) or a non-object document.
        UnknownConfigKeyError: a key is not part of the schema.
        ConfigValidationError: a value is out of its documented domain.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f'Malformed JSON: {exc.msg}', line=exc.lineno, column=exc.colno) from exc
    if not isinstance(data, dict):
        raise ConfigError('Config document must be a JSON object')
    return validate_config(data)


def apply_overrides(
    config: RunConfig,
    overrides: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
) -> RunConfig:
    """Layer environment and flag values over a parsed config and revalidate.

    ``None`` values in ``overrides`` mean "flag not given".
    """
    env = os.environ if environ is None else environ
    merged = config.model_dump()
    threads_env = env.get(ENV_THREADS)
    if threads_env:
        try:
            merged['threads'] = int(threads_env)
        except ValueError as exc:
            raise ConfigValidationError(
                'threads', f'{ENV_THREADS}={threads_env!r} is not an integer'
            ) from exc
        logger.debug('threads taken from %s', ENV_THREADS)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    return validate_config(merged)


def log_level(flag: str | None, environ: Mapping[str, str] | None = None) -> str:
    """Resolve the log level: flag > ``EPIFLUX_LOG_LEVEL`` > WARNING."""
    env = os.environ if environ is None else environ
    return (flag or env.get(ENV_LOG_LEVEL) or 'WARNING').upper()
