"""Phase-controlled decimation of indicator series.

Decimation never interpolates: every output point is a raw point, chosen as
the last sample at or before each grid time (an OBU cannot send a sample it
has not yet received).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .indicators import IndicatorSeries

# relative slack for comparing grid times against raw timestamps
_TIME_TOL = 1e-9


class UndersamplingWarning(UserWarning):
    """The sampling interval is shorter than the raw sample spacing."""


@dataclass(frozen=True)
class SamplingSpec:
    interval: float
    phase: float = 0.0
    mode: Literal["time", "index"] = "time"

    def __post_init__(self):
        if not (math.isfinite(self.interval) and self.interval > 0):
            raise ValueError(f"interval must be positive, got {self.interval}")
        if not 0 <= self.phase < self.interval:
            raise ValueError(f"phase must lie in [0, interval), got {self.phase}")
        if self.mode not in ("time", "index"):
            raise ValueError(f"unknown sampling mode {self.mode!r}")


def select_indices(timestamps, spec: SamplingSpec) -> np.ndarray:
    """Indices of the raw points kept by ``spec``.

    Warns with :class:`UndersamplingWarning` and keeps everything when the
    interval is below the smallest raw gap.
    """
    ts = np.asarray(timestamps, dtype=float)
    n = len(ts)
    if n == 0:
        raise ValueError("cannot decimate an empty series")
    if n == 1:
        return np.zeros(1, dtype=int)
    gaps = np.diff(ts)
    if spec.interval < gaps.min() * (1 - _TIME_TOL):
        warnings.warn(
            f"interval {spec.interval} s is below the minimum raw gap {gaps.min()} s",
            UndersamplingWarning,
            stacklevel=2,
        )
        return np.arange(n)
    if spec.mode == "index":
        gap = float(np.median(gaps))
        step = max(1, round(spec.interval / gap))
        start = math.ceil(spec.phase / gap - _TIME_TOL)
        return np.arange(start, n, step)
    span = ts[-1] - ts[0]
    tol = _TIME_TOL * max(1.0, abs(ts[-1]))
    count = math.floor((span - spec.phase + tol) / spec.interval) + 1
    grid = ts[0] + spec.phase + spec.interval * np.arange(max(count, 0))
    idx = np.searchsorted(ts, grid + tol, side="right") - 1
    return np.unique(idx[idx >= 0])


def decimate(series: IndicatorSeries, spec: SamplingSpec) -> IndicatorSeries:
    """Keep the points of ``series`` selected by ``spec``."""
    return series.take(select_indices(series.timestamps, spec))


def kept_fraction(raw_count: int, sampled_count: int) -> float:
    if raw_count <= 0:
        raise ValueError("raw_count must be positive")
    if not 0 <= sampled_count <= raw_count:
        raise ValueError("sampled_count must lie in [0, raw_count]")
    return sampled_count / raw_count
