from __future__ import annotations

from typing import TypedDict


class StopTimesDTO(TypedDict):
    tau_n: float | None
    tau_n_eps: float | None


class TrajectorySummaryDTO(TypedDict, total=False):
    """JSON summary of a single realisation."""

    n_scale: int
    t_end: float
    n_events: int
    n_proposals: int
    final: list[int]
    drift_integral: list[float]
    stop_times: StopTimesDTO


class DeviationSummaryDTO(TypedDict):
    """Sup-norm deviation of one ensemble from the ODE.

    Quantile keys are ``q05``, ``q50`` and ``q95``.
    """

    n_scale: int
    runs: int
    mean: float
    q05: float
    q50: float
    q95: float


class NormalitySummaryDTO(TypedDict):
    component: int
    t: float
    n_scale: int
    runs: int
    sample_mean: list[float]
    sample_std: list[float]
    theory_var: float
    ks_statistic: float
    ks_p: float
    fitted_mean: float
    fitted_std: float


class CharFunctionPointDTO(TypedDict):
    theta: list[float]
    empirical_re: float
    empirical_im: float
    theory: float
    abs_error: float


class ScalingSummaryDTO(TypedDict):
    """Log-log regression of the fluctuation ratio on N.

    ``theory_intercept`` belongs to the slope -1/2 line predicted by the limit
    covariance.
    """

    slope: float
    intercept: float
    r2: float
    theory_slope: float
    theory_intercept: float
    t: float
    runs: int


class MetadataDTO(TypedDict):
    """Everything needed to rerun a study exactly."""

    study: str
    version: str
    seed: int
    config: dict[str, object]
    wall_time_seconds: float
