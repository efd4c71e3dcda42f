"""Empirical distribution tools: ECDF, two-sample KS, histogram summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .indicators import IndicatorSeries
from .sampling import SamplingSpec, select_indices


@dataclass(frozen=True, eq=False)
class Ecdf:
    """Right-continuous empirical CDF of a finite sample."""

    values: np.ndarray

    def __post_init__(self):
        vs = np.sort(np.asarray(self.values, dtype=float))
        if vs.size == 0:
            raise ValueError("ECDF of an empty sample")
        vs.flags.writeable = False
        object.__setattr__(self, "values", vs)

    @property
    def n(self) -> int:
        return len(self.values)

    def __call__(self, x):
        return np.searchsorted(self.values, x, side="right") / self.n


@dataclass(frozen=True)
class KsResult:
    statistic: float
    critical_value: float

    @property
    def passed(self) -> bool:
        return self.statistic <= self.critical_value


@dataclass(frozen=True)
class DistributionSummary:
    mode: float
    std_dev: float
    bin_width: float
    count: int

    def to_record(self) -> dict:
        return {
            "mode": self.mode,
            "std_dev": self.std_dev,
            "bin_width": self.bin_width,
            "count": self.count,
        }


def _ks_sorted(a: np.ndarray, b: np.ndarray) -> float:
    # integer count differences keep the result correctly rounded
    n, m = len(a), len(b)
    support = np.concatenate((a, b))
    ca = np.searchsorted(a, support, side="right").astype(np.int64)
    cb = np.searchsorted(b, support, side="right").astype(np.int64)
    return int(np.max(np.abs(ca * m - cb * n))) / (n * m)


def ks_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov distance sup_x |F_a(x) - F_b(x)|.

    Both step functions only jump at sample points, so the supremum is
    attained on the merged support and evaluating there is exact.
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("KS statistic needs two non-empty samples")
    return _ks_sorted(a, b)


def ks_coefficient(alpha: float) -> float:
    """Asymptotic two-sided critical coefficient c(alpha); c(0.05) ~= 1.358."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return math.sqrt(-0.5 * math.log(alpha / 2))


def ks_critical_value(n: int, m: int, alpha: float = 0.05) -> float:
    return ks_coefficient(alpha) * math.sqrt((n + m) / (n * m))


def ks_test(a, b, alpha: float = 0.05) -> KsResult:
    """Asymptotic two-sample KS test at significance ``alpha``."""
    ks_coefficient(alpha)
    d = ks_statistic(a, b)
    return KsResult(d, ks_critical_value(len(a), len(b), alpha))


def ks_passing_rate(
    raw: IndicatorSeries,
    interval: float,
    trials: int = 100,
    alpha: float = 0.05,
    seed: int = 0,
) -> float:
    """Fraction of randomly phased decimations whose values pass a KS test against raw.

    Trial ``i`` draws its phase from ``numpy.random.default_rng([seed, i])``,
    so the result does not depend on trial execution order.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if not interval > 0:
        raise ValueError("interval must be positive")
    coef = ks_coefficient(alpha)
    raw_sorted = np.sort(raw.values)
    n = len(raw_sorted)
    if n == 0:
        return 0.0
    passes = 0
    for trial in range(trials):
        phase = np.random.default_rng([seed, trial]).uniform(0.0, interval)
        phase = min(phase, math.nextafter(interval, 0.0))
        idx = select_indices(raw.timestamps, SamplingSpec(interval, phase))
        if len(idx) == 0:
            continue
        sampled = np.sort(raw.values[idx])
        m = len(sampled)
        d = _ks_sorted(raw_sorted, sampled)
        if d <= coef * math.sqrt((n + m) / (n * m)):
            passes += 1
    return passes / trials


def summarize(values, bin_width: float) -> DistributionSummary:
    """Histogram mode and population standard deviation.

    Bins are ``[min + i*w, min + (i+1)*w)``; the mode is the midpoint of the
    fullest bin, lowest bin on ties.  A constant sample has mode equal to
    that constant.
    """
    vs = np.asarray(values, dtype=float)
    if vs.size == 0:
        raise ValueError("cannot summarize an empty sample")
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    lo, hi = float(vs.min()), float(vs.max())
    if lo == hi:
        mode = lo
    else:
        bins = np.floor((vs - lo) / bin_width + 1e-9).astype(int)
        counts = np.bincount(bins)
        mode = lo + (int(np.argmax(counts)) + 0.5) * bin_width
    return DistributionSummary(
        mode=float(mode), std_dev=float(np.std(vs)), bin_width=bin_width, count=int(vs.size)
    )
