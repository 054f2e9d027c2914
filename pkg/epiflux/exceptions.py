from __future__ import annotations

from typing import Any


class EpifluxError(Exception):
    """Base error type for epiflux failures."""

    exit_code: int = 3

    def to_record(self) -> dict[str, Any]:
        """Machine-readable error record written by the CLI."""
        return {
            'error_type': type(self).__name__,
            'message': str(self),
            'exit_code': self.exit_code,
        }


class ConfigError(EpifluxError):
    """Config document could not be parsed or does not match the schema."""

    exit_code = 2

    def __init__(
        self, message: str, *, line: int | None = None, column: int | None = None
    ) -> None:
        self.message = message
        self.line = line
        self.column = column
        super().__init__(message)

    def __str__(self) -> str:  # pragma: no cover - trivial
        if self.line is not None:
            return f'{self.message} (line {self.line}, column {self.column})'
        return self.message

    def to_record(self) -> dict[str, Any]:
        record = super().to_record()
        if self.line is not None:
            record['line'] = self.line
            record['column'] = self.column
        return record


class ConfigValidationError(ConfigError):
    """A config value is outside its documented domain."""

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        super().__init__(f'Invalid value for "{field}": {message}')

    def to_record(self) -> dict[str, Any]:
        record = super().to_record()
        record['field'] = self.field
        return record


class UnknownConfigKeyError(ConfigError):
    """Strict parsing rejected a key that is not part of the schema."""

    def __init__(self, key: str) -> None:
        self.key = key
        super().__init__(f'Unknown config key "{key}"')

    def to_record(self) -> dict[str, Any]:
        record = super().to_record()
        record['key'] = self.key
        return record


class StateUnderflowError(EpifluxError):
    """An event tried to decrement an empty compartment.

    This is a contract violation inside the simulator, never a model state.
    """

    def __init__(self, kind: str, state: tuple[int, int, int]) -> None:
        self.kind = kind
        self.state = state
        super().__init__(f'{kind} cannot be applied to state (S, I, R) = {state}')

    def __reduce__(self) -> tuple[type[StateUnderflowError], tuple[str, tuple[int, int, int]]]:
        return (type(self), (self.kind, self.state))


class EventBudgetExceededError(EpifluxError):
    """Simulation reached its event budget before the horizon (runaway growth)."""

    def __init__(self, budget: int, t: float, run_index: int | None = None) -> None:
        self.budget = budget
        self.t = t
        self.run_index = run_index
        where = f' in run {run_index}' if run_index is not None else ''
        super().__init__(f'Event budget {budget} exceeded at t={t:.6g}{where}')

    def __reduce__(
        self,
    ) -> tuple[type[EventBudgetExceededError], tuple[int, float, int | None]]:
        return (type(self), (self.budget, self.t, self.run_index))

    def to_record(self) -> dict[str, Any]:
        record = super().to_record()
        record['run_index'] = self.run_index
        record['budget'] = self.budget
        return record


class HorizonError(EpifluxError):
    """Requested time lies outside the available horizon."""

    def __init__(self, t: float, horizon: float) -> None:
        self.t = t
        self.horizon = horizon
        super().__init__(f'Time {t!r} is outside the horizon [0, {horizon!r}]')

    def __reduce__(self) -> tuple[type[HorizonError], tuple[float, float]]:
        return (type(self), (self.t, self.horizon))


class StepSizeError(EpifluxError):
    """Fixed-step integration drove a component negative beyond tolerance."""

    def __init__(self, h: float, t: float, value: float) -> None:
        self.h = h
        self.t = t
        self.value = value
        super().__init__(f'Step h={h!r} too large: component {value!r} at t={t!r}')


class GridMismatchError(EpifluxError):
    """Sampled runs and ODE solution do not share a time grid."""


class DegenerateSampleError(EpifluxError):
    """Sample set is too small or has zero variance."""


class RegressionInputError(EpifluxError):
    """Scaling regression received unusable points."""


class StatisticalGateError(EpifluxError):
    """A statistical acceptance gate failed while gating was requested."""

    exit_code = 4

    def __init__(self, failures: list[str]) -> None:
        self.failures = failures
        super().__init__('Statistical gate failed: ' + '; '.join(failures))

    def to_record(self) -> dict[str, Any]:
        record = super().to_record()
        record['failures'] = list(self.failures)
        return record
