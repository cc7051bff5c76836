"""Cascade shape statistics and distribution fits.

The two fitters follow the scikit-learn estimator protocol (``fit`` returns
``self``, learned attributes end in ``_``, ``get_params`` works) so they drop
into pipelines and model-selection utilities.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import zeta
from sklearn.base import BaseEstimator

from ._validation import check_is_fitted, check_samples
from .errors import DomainError, FitError
from .network import RecruitmentForest

MIN_TAIL = 10


@dataclass(frozen=True)
class CascadeStats:
    tree_count: int
    node_count: int
    size_histogram: dict[int, int]
    depth_histogram: dict[int, int]
    branching_histogram: dict[int, int]
    mean_branching_with_singletons: float
    mean_branching_without_singletons: float
    attrition_rate: float
    max_size: int
    max_depth: int
    include_singletons: bool

    def to_dict(self) -> dict:
        hist = lambda h: {str(k): v for k, v in sorted(h.items())}
        return {
            "tree_count": self.tree_count, "node_count": self.node_count,
            "size_histogram": hist(self.size_histogram),
            "depth_histogram": hist(self.depth_histogram),
            "branching_histogram": hist(self.branching_histogram),
            "mean_branching_with_singletons": self.mean_branching_with_singletons,
            "mean_branching_without_singletons": self.mean_branching_without_singletons,
            "attrition_rate": self.attrition_rate, "max_size": self.max_size,
            "max_depth": self.max_depth, "include_singletons": self.include_singletons,
        }


def _mean_branching(forest: RecruitmentForest, nodes: list[int]) -> float:
    if not nodes:
        return 0.0
    return sum(len(forest.children(a)) for a in nodes) / len(nodes)


def compute_stats(forest: RecruitmentForest, include_singletons: bool = True) -> CascadeStats:
    """Per-tree size and depth, per-node branching and attrition.

    With ``include_singletons=False`` single-node trees are dropped before any
    histogram or rate is computed. Both mean branching factors are always
    reported.
    """
    trees = forest.trees()
    depths = forest.tree_depths()
    all_nodes = [a for members in trees.values() for a in members]
    multi = [a for members in trees.values() if len(members) > 1 for a in members]
    kept = {r: m for r, m in trees.items() if include_singletons or len(m) > 1}
    nodes = [a for members in kept.values() for a in members]
    branching = Counter(len(forest.children(a)) for a in nodes)
    return CascadeStats(
        tree_count=len(kept),
        node_count=len(nodes),
        size_histogram=dict(Counter(len(m) for m in kept.values())),
        depth_histogram=dict(Counter(depths[r] for r in kept)),
        branching_histogram=dict(branching),
        mean_branching_with_singletons=_mean_branching(forest, all_nodes),
        mean_branching_without_singletons=_mean_branching(forest, multi),
        attrition_rate=branching.get(0, 0) / len(nodes) if nodes else 0.0,
        max_size=max((len(m) for m in kept.values()), default=0),
        max_depth=max((depths[r] for r in kept), default=0),
        include_singletons=include_singletons,
    )


def inter_signup_times(forest: RecruitmentForest) -> np.ndarray:
    """Delay between each recruit's signup and its recruiter's."""
    return np.array([r.signup_time - forest.signup_time(r.parent)
                     for r in forest.records if r.parent is not None], dtype=float)


# -- power law ---------------------------------------------------------------

@dataclass(frozen=True)
class PowerLawFit:
    exponent: float  # slope on a log-log plot, i.e. -alpha
    xmin: int
    n_tail: int
    ks_statistic: float
    lsq_exponent: float | None = None

    @property
    def alpha(self) -> float:
        return -self.exponent

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "xmin": self.xmin, "n_tail": self.n_tail,
                "ks_statistic": self.ks_statistic, "lsq_exponent": self.lsq_exponent}


def _discrete_alpha(log_sum: float, n: int, xmin: float, bounds: tuple[float, float]) -> float:
    def nll(a):
        return n * np.log(zeta(a, xmin)) + a * log_sum
    res = minimize_scalar(nll, bounds=bounds, method="bounded", options={"xatol": 1e-7})
    return float(res.x)


def _ks_distance(tail: np.ndarray, alpha: float, xmin: float) -> float:
    values, counts = np.unique(tail, return_counts=True)
    empirical = np.cumsum(counts) / tail.size
    model = 1.0 - zeta(alpha, values + 1) / zeta(alpha, xmin)
    # between observed values the model keeps rising while the empirical CDF
    # is flat, so also compare at x - 1
    below = np.concatenate(([0.0], empirical[:-1]))
    model_below = 1.0 - zeta(alpha, values) / zeta(alpha, xmin)
    return float(max(np.max(np.abs(empirical - model)), np.max(np.abs(below - model_below))))


def loglog_slope(samples, bins_per_decade: int = 5) -> float | None:
    """Least-squares slope of log density against log value over log-spaced bins."""
    x = np.asarray(samples, dtype=float)
    if np.unique(x).size < 2:
        return None
    lo, hi = np.log10(x.min()), np.log10(x.max() + 1)
    edges = np.unique(np.floor(np.logspace(lo, hi, max(2, int((hi - lo) * bins_per_decade) + 1))))
    if edges.size < 3:
        return None
    counts, _ = np.histogram(x, bins=edges)
    width = np.diff(edges)
    keep = counts > 0
    if keep.sum() < 2:
        return None
    centers = np.sqrt(edges[:-1] * np.maximum(edges[1:] - 1, edges[:-1]))
    slope, _ = np.polyfit(np.log(centers[keep]), np.log(counts[keep] / width[keep] / x.size), 1)
    return float(slope)


class DiscretePowerLaw(BaseEstimator):
    """Discrete power law ``p(x) ~ x**-alpha`` for ``x >= xmin``.

    ``alpha`` is the maximum-likelihood estimate for a given ``xmin``. When
    ``xmin`` is None it is chosen among the smallest observed values to
    minimise the Kolmogorov-Smirnov distance between the tail and the fit.

    Parameters
    ----------
    xmin : int or None
        Fixed lower cutoff; None selects it from the data.
    min_tail : int
        Fewest samples allowed at or above a candidate cutoff.
    max_candidates : int
        How many of the smallest distinct values are tried as cutoffs.
    alpha_bounds : tuple of float
        Search interval for the exponent.
    """

    def __init__(self, xmin=None, min_tail=MIN_TAIL, max_candidates=100,
                 alpha_bounds=(1.0001, 8.0)):
        self.xmin = xmin
        self.min_tail = min_tail
        self.max_candidates = max_candidates
        self.alpha_bounds = alpha_bounds

    def fit(self, X, y=None):
        x = np.sort(check_samples(X, integer=True, min_samples=self.min_tail))
        if self.xmin is not None:
            candidates = np.array([float(self.xmin)])
        else:
            uniq = np.unique(x)
            tail_sizes = x.size - np.searchsorted(x, uniq, side="left")
            candidates = uniq[tail_sizes >= self.min_tail][: self.max_candidates]
        logs = np.log(x)
        suffix = np.concatenate((np.cumsum(logs[::-1])[::-1], [0.0]))

        best = None
        for xmin in candidates:
            start = int(np.searchsorted(x, xmin, side="left"))
            tail = x[start:]
            if tail.size < self.min_tail or np.unique(tail).size < 2:
                continue
            alpha = _discrete_alpha(float(suffix[start]), tail.size, float(xmin), self.alpha_bounds)
            ks = _ks_distance(tail, alpha, float(xmin))
            if best is None or ks < best[0]:
                best = (ks, alpha, int(xmin), tail.size)
        if best is None:
            raise FitError("no cutoff leaves a non-degenerate tail of "
                           f"at least {self.min_tail} samples")
        self.ks_, self.alpha_, self.xmin_, self.n_tail_ = best
        self.lsq_exponent_ = loglog_slope(x[x >= self.xmin_])
        return self

    def logpmf(self, x):
        check_is_fitted(self, "alpha_")
        x = np.asarray(x, dtype=float)
        out = -self.alpha_ * np.log(np.where(x > 0, x, 1.0)) - np.log(zeta(self.alpha_, self.xmin_))
        return np.where(x >= self.xmin_, out, -np.inf)

    def ccdf(self, x):
        """P(X >= x) under the fitted tail."""
        check_is_fitted(self, "alpha_")
        x = np.maximum(np.asarray(x, dtype=float), self.xmin_)
        return zeta(self.alpha_, x) / zeta(self.alpha_, self.xmin_)

    def score(self, X, y=None):
        """Mean log-likelihood of the samples at or above ``xmin_``."""
        x = check_samples(X, integer=True)
        x = x[x >= self.xmin_]
        return float(np.mean(self.logpmf(x))) if x.size else float("-inf")

    def result(self) -> PowerLawFit:
        check_is_fitted(self, "alpha_")
        return PowerLawFit(-self.alpha_, self.xmin_, self.n_tail_, self.ks_, self.lsq_exponent_)


def fit_power_law(samples, **params) -> PowerLawFit:
    return DiscretePowerLaw(**params).fit(samples).result()


# -- exponential -------------------------------------------------------------

@dataclass(frozen=True)
class ExponentialFit:
    rate: float
    n: int
    log_likelihood: float

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    def to_dict(self) -> dict:
        return {"rate": self.rate, "mean": self.mean, "n": self.n,
                "log_likelihood": self.log_likelihood}


class ExponentialDelay(BaseEstimator):
    """Exponential waiting-time model; the MLE rate is one over the sample mean."""

    def __init__(self, min_samples=MIN_TAIL):
        self.min_samples = min_samples

    def fit(self, X, y=None):
        t = check_samples(X, min_samples=self.min_samples, name="inter-signup times")
        self.rate_ = 1.0 / float(np.mean(t))
        self.n_ = int(t.size)
        self.log_likelihood_ = self.n_ * np.log(self.rate_) - self.rate_ * float(np.sum(t))
        return self

    def ccdf(self, t):
        check_is_fitted(self, "rate_")
        return np.exp(-self.rate_ * np.asarray(t, dtype=float))

    def score(self, X, y=None):
        t = check_samples(X, name="inter-signup times")
        return float(np.log(self.rate_) - self.rate_ * np.mean(t))

    def result(self) -> ExponentialFit:
        check_is_fitted(self, "rate_")
        return ExponentialFit(self.rate_, self.n_, float(self.log_likelihood_))


def fit_exponential(inter_signup_times, **params) -> ExponentialFit:
    return ExponentialDelay(**params).fit(inter_signup_times).result()


# -- plot tables -------------------------------------------------------------

def loglog_histogram(samples) -> list[tuple[int, int, float]]:
    """``(value, count, frequency)`` rows for a log-log distribution plot."""
    values, counts = np.unique(np.asarray(samples, dtype=int), return_counts=True)
    total = counts.sum()
    return [(int(v), int(c), float(c / total)) for v, c in zip(values, counts)]


def ccdf_table(samples, fit: ExponentialFit | None = None) -> list[tuple[float, float, float | None]]:
    """``(t, empirical P(T >= t), fitted P(T >= t))`` at each distinct sample."""
    t = np.sort(np.asarray(samples, dtype=float))
    values = np.unique(t)
    empirical = 1.0 - np.searchsorted(t, values, side="left") / t.size
    fitted = np.exp(-fit.rate * values) if fit is not None else [None] * values.size
    return [(float(v), float(e), None if f is None else float(f))
            for v, e, f in zip(values, empirical, fitted)]


@dataclass(frozen=True)
class Timeline:
    bin_start: tuple[float, ...]
    counts: tuple[int, ...]
    cumulative: tuple[int, ...]

    def rows(self):
        return list(zip(self.bin_start, self.counts, self.cumulative))


def recruitment_timeline(forest: RecruitmentForest, bin_width: float) -> Timeline:
    """Signups per ``bin_width``-second bin from time 0, with running totals."""
    if not bin_width > 0:
        raise DomainError("bin width must be positive")
    if not len(forest):
        return Timeline((), (), ())
    times = np.array([r.signup_time for r in forest.records])
    idx = np.floor(times / bin_width).astype(int)
    counts = np.bincount(idx)
    starts = tuple(float(i * bin_width) for i in range(counts.size))
    return Timeline(starts, tuple(int(c) for c in counts), tuple(int(c) for c in np.cumsum(counts)))
