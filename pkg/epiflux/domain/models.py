"""Domain models and value objects.

Only pure data types live here. No I/O, no logging, no env access.
"""

from __future__ import annotations

import math
from collections.abc import Iterator
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

# Components of constructed fractions may dip below zero by rounding only.
FRACTION_TOLERANCE: float = 1e-9


@dataclass(slots=True, frozen=True)
class ModelParams:
    """Rates of the seasonally forced SIR model with births and deaths.

    Attributes:
        nu: per-capita birth and death rate (1/year).
        gamma: per-capita recovery rate (1/year).
        beta0: baseline transmission rate (1/year).
        beta1: forcing amplitude; 0 selects the unforced mode.
        n_scale: initial population size N.
    """

    nu: float
    gamma: float
    beta0: float
    beta1: float
    n_scale: int

    def __post_init__(self) -> None:
        for name in ('nu', 'gamma', 'beta0', 'beta1'):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f'{name} must be finite')
            object.__setattr__(self, name, value)
        if self.nu < 0:
            raise ValueError('nu must be non-negative')
        if self.gamma < 0:
            raise ValueError('gamma must be non-negative')
        if self.beta0 < 0:
            raise ValueError('beta0 must be non-negative')
        if not 0.0 <= self.beta1 < 1.0:
            raise ValueError('beta1 must lie in [0, 1)')
        if int(self.n_scale) != self.n_scale or self.n_scale < 1:
            raise ValueError('n_scale must be an integer >= 1')
        object.__setattr__(self, 'n_scale', int(self.n_scale))

    @property
    def beta_max(self) -> float:
        """Upper bound of the forcing, beta0 * (1 + beta1)."""
        return self.beta0 * (1.0 + self.beta1)

    def max_total_rate(self) -> float:
        """Bound M*N on every truncated per-event rate."""
        n = self.n_scale
        return max(2.0 * self.nu * n, 2.0 * self.beta_max * n, 2.0 * self.gamma * n)


@dataclass(slots=True, frozen=True)
class PopulationState:
    """Integer compartment counts (S, I, R)."""

    s: int
    i: int
    r: int

    def __post_init__(self) -> None:
        for name in ('s', 'i', 'r'):
            value = getattr(self, name)
            if int(value) != value:
                raise ValueError(f'{name} must be an integer count')
            if value < 0:
                raise ValueError(f'{name} must be non-negative')
            object.__setattr__(self, name, int(value))

    @classmethod
    def from_fractions(
        cls, s_frac: float, i_frac: float, r_frac: float, n: int
    ) -> PopulationState:
        """Largest-remainder rounding of ``fraction * n`` so the counts sum to ``n``.

        Fractions must sum to 1 within 1e-9; ties go to S, then I, then R.
        """
        fracs = (float(s_frac), float(i_frac), float(r_frac))
        if any(f < 0 or not math.isfinite(f) for f in fracs):
            raise ValueError('initial fractions must be finite and non-negative')
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError('initial fractions must sum to 1')
        if n < 1:
            raise ValueError('n must be >= 1')
        exact = [f * n for f in fracs]
        counts = [math.floor(v) for v in exact]
        short = n - sum(counts)
        order = sorted(range(3), key=lambda k: (-(exact[k] - counts[k]), k))
        for k in order[: max(short, 0)]:
            counts[k] += 1
        return cls(counts[0], counts[1], counts[2])

    def total(self) -> int:
        return self.s + self.i + self.r

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.s, self.i, self.r)

    def to_fractions(self, n_scale: int) -> FractionState:
        """Scale counts by the initial population size N."""
        return FractionState(self.s / n_scale, self.i / n_scale, self.r / n_scale)

    def normalized(self) -> FractionState:
        """Fractions of the current total; the empty population maps to zeros."""
        total = self.total()
        if total == 0:
            return FractionState(0.0, 0.0, 0.0)
        return FractionState(self.s / total, self.i / total, self.r / total)

    def __str__(self) -> str:
        return f'(S={self.s}, I={self.i}, R={self.r})'


@dataclass(slots=True, frozen=True)
class FractionState:
    """Real-valued population fractions (x, y, z)."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        for name in ('x', 'y', 'z'):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < -FRACTION_TOLERANCE:
                raise ValueError(f'{name} must be finite and non-negative')
            object.__setattr__(self, name, value)

    @classmethod
    def from_array(cls, values: npt.ArrayLike) -> FractionState:
        x, y, z = (float(v) for v in np.asarray(values, dtype=np.float64))
        return cls(x, y, z)

    def mass(self) -> float:
        return self.x + self.y + self.z

    def as_array(self) -> npt.NDArray[np.float64]:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


class EventKind(IntEnum):
    """The six transitions of the model, in rate-table order."""

    BIRTH = 0
    SUSCEPTIBLE_DEATH = 1
    INFECTION = 2
    RECOVERY = 3
    INFECTIOUS_DEATH = 4
    RECOVERED_DEATH = 5

    @property
    def jump(self) -> tuple[int, int, int]:
        """Change of (S, I, R) caused by this event."""
        return _JUMPS[self]

    @property
    def label(self) -> str:
        return self.name.lower()


_JUMPS: dict[EventKind, tuple[int, int, int]] = {
    EventKind.BIRTH: (1, 0, 0),
    EventKind.SUSCEPTIBLE_DEATH: (-1, 0, 0),
    EventKind.INFECTION: (-1, 1, 0),
    EventKind.RECOVERY: (0, -1, 1),
    EventKind.INFECTIOUS_DEATH: (0, -1, 0),
    EventKind.RECOVERED_DEATH: (0, 0, -1),
}


class RecordMode(str, Enum):
    FULL_EVENT_LOG = 'full_event_log'
    SAMPLED_GRID = 'sampled_grid'
    ENDPOINT_ONLY = 'endpoint_only'


class Truncation(str, Enum):
    ORIGINAL = 'original'
    TRUNCATED = 'truncated'
    COUPLED = 'coupled'


DEFAULT_EVENT_BUDGET: int = 10**10


@dataclass(slots=True, frozen=True)
class SimConfig:
    """Configuration of a single realisation.

    ``grid_dt`` is required for ``RecordMode.SAMPLED_GRID`` and ignored otherwise.
    ``stream_index`` selects the realisation's random stream under ``seed``.
    """

    params: ModelParams
    t_end: float
    seed: int = 0
    record_mode: RecordMode = RecordMode.FULL_EVENT_LOG
    grid_dt: float | None = None
    truncation: Truncation = Truncation.ORIGINAL
    epsilon: float = 0.05
    event_budget: int = DEFAULT_EVENT_BUDGET
    stream_index: int = 0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ValueError('t_end must be positive')
        if self.record_mode is RecordMode.SAMPLED_GRID and (
            self.grid_dt is None or not self.grid_dt > 0
        ):
            raise ValueError('grid_dt must be positive for sampled_grid recording')
        if not self.epsilon > 0:
            raise ValueError('epsilon must be positive')
        if self.event_budget < 1:
            raise ValueError('event_budget must be >= 1')
        if not 0 <= self.seed < 2**64:
            raise ValueError('seed must be an unsigned 64-bit integer')
        if self.stream_index < 0:
            raise ValueError('stream_index must be non-negative')


class GridPoint(NamedTuple):
    t: float
    state: PopulationState


class StopTimes(NamedTuple):
    """First exit times: total above 2N, and total off N by more than epsilon*N."""

    tau_n: float | None
    tau_n_eps: float | None


def _empty_times() -> npt.NDArray[np.float64]:
    return np.empty(0, dtype=np.float64)


def _empty_kinds() -> npt.NDArray[np.int8]:
    return np.empty(0, dtype=np.int8)


@dataclass(slots=True, frozen=True, eq=False)
class Trajectory:
    """One realisation of the chain.

    ``event_times``/``event_kinds`` hold the event log when it was recorded;
    ``drift_integral`` is the exact integral of the drift F along the path
    over [0, t_end] and is always present.
    """

    initial: PopulationState
    final: PopulationState
    t_end: float
    n_scale: int
    drift_integral: tuple[float, float, float]
    event_times: npt.NDArray[np.float64] = field(default_factory=_empty_times)
    event_kinds: npt.NDArray[np.int8] = field(default_factory=_empty_kinds)
    has_event_log: bool = False
    grid: tuple[GridPoint, ...] | None = None
    stop_times: StopTimes | None = None
    n_events: int = 0
    n_proposals: int = 0

    def events(self) -> Iterator[tuple[float, EventKind]]:
        for t, kind in zip(self.event_times.tolist(), self.event_kinds.tolist()):
            yield t, EventKind(kind)

    def states(self) -> Iterator[tuple[float, PopulationState]]:
        """Replay the log, yielding the state right after every event."""
        s, i, r = self.initial.as_tuple()
        for t, kind in self.events():
            ds, di, dr = kind.jump
            s, i, r = s + ds, i + di, r + dr
            yield t, PopulationState(s, i, r)

    def same_events(self, other: Trajectory, before: float | None = None) -> bool:
        """Exact comparison of event logs, optionally restricted to t < before."""
        a_t, a_k = self.event_times, self.event_kinds
        b_t, b_k = other.event_times, other.event_kinds
        if before is not None:
            a_mask = a_t < before
            b_mask = b_t < before
            a_t, a_k = a_t[a_mask], a_k[a_mask]
            b_t, b_k = b_t[b_mask], b_k[b_mask]
        return bool(np.array_equal(a_t, b_t) and np.array_equal(a_k, b_k))


@dataclass(slots=True, frozen=True)
class FluctuationSample:
    """Value of W_N(t) for one realisation."""

    t: float
    w: tuple[float, float, float]
    n_scale: int
    run_index: int = 0

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in self.w):
            raise ValueError('w must be finite')
