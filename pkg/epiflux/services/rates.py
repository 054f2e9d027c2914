"""Seasonal forcing and per-event transition rates.

Rates follow the six-row table of the model; the truncated variant caps the
indicated counts at 2N so the total rate stays bounded by ``M * N``.
"""

from __future__ import annotations

import math

import numpy as np
import numpy.typing as npt

from epiflux.domain.models import EventKind, ModelParams, PopulationState
from epiflux.exceptions import StateUnderflowError

TWO_PI: float = 2.0 * math.pi


def beta_at(params: ModelParams, t: float) -> float:
    """Transmission rate beta0 * (1 + beta1 * cos(2 pi t))."""
    return params.beta0 * (1.0 + params.beta1 * math.cos(TWO_PI * t))


def acceptance_ratio(params: ModelParams, t: float) -> float:
    """Probability beta(t) / beta_max that a proposed infection is kept."""
    beta_max = params.beta_max
    return beta_at(params, t) / beta_max if beta_max > 0 else 0.0


def beta_antiderivative(params: ModelParams, t: float) -> float:
    """Closed form of the integral of beta over [0, t]."""
    return params.beta0 * (t + params.beta1 * math.sin(TWO_PI * t) / TWO_PI)


def _infection(beta: float, s: float, i: int, total: int) -> float:
    # Empty population is absorbing; 0/0 resolves to 0.
    if total == 0:
        return 0.0
    return beta * s * i / total


def event_rates(
    params: ModelParams, state: PopulationState, t: float, *, truncated: bool = False
) -> tuple[float, float, float, float, float, float]:
    """All six rates at once, indexed by ``EventKind``."""
    nu = params.nu
    s, i, r = state.s, state.i, state.r
    total = s + i + r
    beta = beta_at(params, t)
    if truncated:
        cap = 2 * params.n_scale
        s_cap = min(s, cap)
        return (
            nu * min(total, cap),
            nu * s_cap,
            _infection(beta, s_cap, i, total),
            params.gamma * min(i, cap),
            nu * min(i, cap),
            nu * min(r, cap),
        )
    return (
        nu * total,
        nu * s,
        _infection(beta, s, i, total),
        params.gamma * i,
        nu * i,
        nu * r,
    )


def event_rate(
    params: ModelParams, state: PopulationState, t: float, kind: EventKind
) -> float:
    """Rate of ``kind`` in the original chain at time ``t``."""
    return event_rates(params, state, t)[kind]


def truncated_event_rate(
    params: ModelParams, state: PopulationState, t: float, kind: EventKind
) -> float:
    """Rate of ``kind`` in the truncated chain (counts capped at 2N)."""
    return event_rates(params, state, t, truncated=True)[kind]


def apply_event(state: PopulationState, kind: EventKind) -> PopulationState:
    """Apply the transition of ``kind``.

    Raises:
        StateUnderflowError: the event would empty an already empty compartment.
    """
    ds, di, dr = kind.jump
    s, i, r = state.s + ds, state.i + di, state.r + dr
    if s < 0 or i < 0 or r < 0:
        raise StateUnderflowError(kind.label, state.as_tuple())
    return PopulationState(s, i, r)


def beta_antiderivative_grid(
    params: ModelParams, times: npt.NDArray[np.float64]
) -> npt.NDArray[np.float64]:
    """Vectorised ``beta_antiderivative`` over an array of times."""
    return params.beta0 * (times + params.beta1 * np.sin(TWO_PI * times) / TWO_PI)


def beta_grid(params: ModelParams, times: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Vectorised ``beta_at`` over an array of times."""
    return params.beta0 * (1.0 + params.beta1 * np.cos(TWO_PI * times))
