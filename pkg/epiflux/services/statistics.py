"""Statistics over ensembles: ODE deviation, W_N normality and 1/sqrt(N) scaling."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy import stats

from epiflux.domain.models import FluctuationSample, Trajectory
from epiflux.exceptions import DegenerateSampleError, GridMismatchError, RegressionInputError
from epiflux.ports.artifact_store import ArtifactStore
from epiflux.services.ensemble import RunSummary, sup_deviation
from epiflux.services.fluctuation import LimitCovariance
from epiflux.services.meanfield import OdeSolution

MIN_NORMALITY_SAMPLES: int = 100


@dataclass(slots=True, frozen=True)
class DeviationReport:
    """Per-run sup-norm deviations from the ODE, with summary quantiles."""

    n_scale: int
    per_run: tuple[float, ...]
    mean: float
    q05: float
    q50: float
    q95: float


def _summarise(n_scale: int, values: Sequence[float]) -> DeviationReport:
    arr = np.asarray(values, dtype=np.float64)
    q05, q50, q95 = np.quantile(arr, [0.05, 0.5, 0.95]).tolist()
    return DeviationReport(
        n_scale=n_scale,
        per_run=tuple(arr.tolist()),
        mean=float(arr.mean()),
        q05=q05,
        q50=q50,
        q95=q95,
    )


def deviation_report(runs: Sequence[Trajectory], ode: OdeSolution) -> DeviationReport:
    """Sup over each run's grid of the max-norm gap between (S, I, R)/T and the ODE.

    Raises:
        GridMismatchError: runs lack a grid, grids differ, or a grid time is not an ODE step.
    """
    if not runs:
        raise ValueError('at least one run is required')
    first = runs[0].grid
    if first is None:
        raise GridMismatchError('runs were recorded without a sampling grid')
    times = np.array([p.t for p in first], dtype=np.float64)
    for traj in runs[1:]:
        if traj.grid is None or len(traj.grid) != len(times):
            raise GridMismatchError('runs do not share a sampling grid')
        if not np.array_equal(np.array([p.t for p in traj.grid]), times):
            raise GridMismatchError('runs do not share a sampling grid')
    nearest = np.abs(ode.times[:, np.newaxis] - times[np.newaxis, :]).min(axis=0)
    if times.max() > ode.t_end + 1e-12 or np.any(nearest > 1e-9):
        raise GridMismatchError('sampling grid is not aligned with the ODE steps')
    ode_states = ode.on_grid(times)
    deviations = [sup_deviation(traj.grid or (), ode_states) for traj in runs]
    return _summarise(runs[0].n_scale, deviations)


def deviation_from_summaries(summaries: Sequence[RunSummary]) -> DeviationReport:
    """Deviation report from ensemble summaries that recorded a sup deviation."""
    values = [s.sup_deviation for s in summaries]
    if not values or any(v is None for v in values):
        raise GridMismatchError('summaries carry no sup deviation; set grid_dt')
    return _summarise(summaries[0].n_scale, [float(v) for v in values if v is not None])


@dataclass(slots=True, frozen=True)
class Histogram:
    edges: npt.NDArray[np.float64]
    counts: npt.NDArray[np.int64]

    @property
    def centers(self) -> npt.NDArray[np.float64]:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def density(self) -> npt.NDArray[np.float64]:
        widths = np.diff(self.edges)
        return self.counts / (self.counts.sum() * widths)


def freedman_diaconis_bins(values: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Bin edges with width 2 * IQR / n^(1/3)."""
    return np.histogram_bin_edges(np.asarray(values, dtype=np.float64), bins='fd')


def histogram(values: npt.ArrayLike) -> Histogram:
    arr = np.asarray(values, dtype=np.float64)
    counts, edges = np.histogram(arr, bins=freedman_diaconis_bins(arr))
    return Histogram(edges=edges, counts=counts.astype(np.int64))


@dataclass(slots=True, frozen=True)
class NormalityReport:
    """Marginal of one W_N component against the predicted Normal(0, theory_var)."""

    component: int
    n_samples: int
    sample_mean: tuple[float, float, float]
    sample_std: tuple[float, float, float]
    theory_var: float
    ks_statistic: float
    ks_p: float
    fitted_normal: tuple[float, float]
    histogram: Histogram

    @property
    def standard_error(self) -> float:
        return self.sample_std[self.component - 1] / math.sqrt(self.n_samples)

    def curves(self) -> list[tuple[float, float, float]]:
        """(center, fitted pdf, theory pdf) at each bin center."""
        mu, sd = self.fitted_normal
        centers = self.histogram.centers
        fitted = stats.norm.pdf(centers, loc=mu, scale=sd)
        theory = stats.norm.pdf(centers, loc=0.0, scale=math.sqrt(self.theory_var))
        return list(zip(centers.tolist(), fitted.tolist(), theory.tolist()))


def _as_matrix(samples: Sequence[FluctuationSample]) -> npt.NDArray[np.float64]:
    return np.array([s.w for s in samples], dtype=np.float64)


def normality_report(
    w_samples: Sequence[FluctuationSample], component: int, theory_var: float
) -> NormalityReport:
    """KS test of one component against the fully specified theory normal.

    ``component`` is 1-based. The fitted normal is the maximum-likelihood fit
    (sample mean and uncorrected sample std), reported next to the theory curve.

    Raises:
        DegenerateSampleError: fewer than 100 samples, zero sample variance, or a
            non-positive theory variance.
    """
    if component not in (1, 2, 3):
        raise ValueError('component must be 1, 2 or 3')
    if not theory_var > 0:
        raise DegenerateSampleError('theory variance must be positive')
    if len(w_samples) < MIN_NORMALITY_SAMPLES:
        raise DegenerateSampleError(
            f'normality needs at least {MIN_NORMALITY_SAMPLES} samples, got {len(w_samples)}'
        )
    w = _as_matrix(w_samples)
    values = w[:, component - 1]
    if float(np.ptp(values)) == 0.0:
        raise DegenerateSampleError('samples have zero variance')
    ks = stats.kstest(values, 'norm', args=(0.0, math.sqrt(theory_var)))
    loc, scale = stats.norm.fit(values)
    mean = w.mean(axis=0)
    std = w.std(axis=0, ddof=1)
    return NormalityReport(
        component=component,
        n_samples=len(values),
        sample_mean=(float(mean[0]), float(mean[1]), float(mean[2])),
        sample_std=(float(std[0]), float(std[1]), float(std[2])),
        theory_var=float(theory_var),
        ks_statistic=float(ks.statistic),
        ks_p=float(ks.pvalue),
        fitted_normal=(float(loc), float(scale)),
        histogram=histogram(values),
    )


@dataclass(slots=True, frozen=True)
class ScalingPoint:
    """Spread of the infective component of Z_N(t) relative to the mean infective fraction."""

    n: int
    sigma_i: float
    f_i: float
    ratio: float

    @classmethod
    def from_moments(cls, n: int, sigma_i: float, f_i: float) -> ScalingPoint:
        if sigma_i < 0:
            raise RegressionInputError('sigma_i must be non-negative')
        if not f_i > 0:
            raise RegressionInputError(f'mean infective fraction must be positive, got {f_i}')
        return cls(n=n, sigma_i=sigma_i, f_i=f_i, ratio=sigma_i / f_i)


def scaling_point(summaries: Sequence[RunSummary], t: float) -> ScalingPoint:
    """Scaling point from one ensemble: sigma_i = std(w2) / sqrt(N), f_i = mean I(t) / N."""
    if len(summaries) < 2:
        raise DegenerateSampleError('at least two runs are required')
    n = summaries[0].n_scale
    w2 = np.array([s.w_at(t).w[1] for s in summaries], dtype=np.float64)
    infective = np.array([s.state_at(t).i / n for s in summaries], dtype=np.float64)
    sigma_i = float(np.std(w2, ddof=1)) / math.sqrt(n)
    return ScalingPoint.from_moments(n, sigma_i, float(infective.mean()))


@dataclass(slots=True, frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r2: float


def scaling_regression(points: Sequence[ScalingPoint]) -> ScalingFit:
    """Least squares of log10(ratio) on log10(N).

    Raises:
        RegressionInputError: fewer than 3 points, repeated N, or a nonpositive ratio.
    """
    if len(points) < 3:
        raise RegressionInputError('at least 3 points are required')
    ns = [p.n for p in points]
    if len(set(ns)) != len(ns):
        raise RegressionInputError('population sizes must be distinct')
    if any(not p.ratio > 0 for p in points):
        raise RegressionInputError('ratios must be positive')
    x = np.log10(np.asarray(ns, dtype=np.float64))
    y = np.log10(np.asarray([p.ratio for p in points], dtype=np.float64))
    fit = stats.linregress(x, y)
    return ScalingFit(
        slope=float(fit.slope), intercept=float(fit.intercept), r2=float(fit.rvalue**2)
    )


def theory_ratio(sigma: LimitCovariance, ode: OdeSolution, n: int, t: float) -> float:
    """Ratio predicted by the limit theorems: sqrt(Sigma22(t) / N) / y(t)."""
    return math.sqrt(float(sigma.at(t)[1, 1]) / n) / ode.at(t).y


def export_scaling(
    store: ArtifactStore, points: Sequence[ScalingPoint], name: str = 'scaling.csv'
) -> None:
    rows = ((p.n, p.sigma_i, p.f_i, p.ratio) for p in points)
    store.write_csv(name, ('n', 'sigma_i', 'f_i', 'ratio'), rows)


def export_histogram(store: ArtifactStore, hist: Histogram, name: str) -> None:
    rows = (
        (float(lo), float(hi), int(c))
        for lo, hi, c in zip(hist.edges[:-1], hist.edges[1:], hist.counts)
    )
    store.write_csv(name, ('bin_lo', 'bin_hi', 'count'), rows)


def export_normality(
    store: ArtifactStore, report: NormalityReport, prefix: str = 'normality'
) -> None:
    export_histogram(store, report.histogram, f'{prefix}_hist.csv')
    store.write_csv(
        f'{prefix}_curves.csv', ('x', 'fitted_pdf', 'theory_pdf'), report.curves()
    )
