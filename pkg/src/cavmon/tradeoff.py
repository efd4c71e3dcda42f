"""Compression-versus-reliability objective and interval sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .events import EventMatch, detect_events, match_events, success_ratio
from .indicators import IndicatorKind, IndicatorSeries
from .sampling import SamplingSpec, decimate
from .stats import DistributionSummary, summarize

DEFAULT_INTERVALS = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)
DELAY_BIN = 0.05
ERROR_BIN = 0.1
# weighted sums closer than this count as tied
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class Weights:
    communication: float = 0.5
    reliability: float = 0.5

    def __post_init__(self):
        for w in (self.communication, self.reliability):
            if not 0 <= w <= 1:
                raise ValueError(f"weights must lie in [0, 1], got {w}")
        if not math.isclose(self.communication + self.reliability, 1.0, abs_tol=1e-12):
            raise ValueError("weights must sum to 1")

    def combine(self, compression: float, success: float) -> float:
        return self.communication * compression + self.reliability * success


@dataclass(frozen=True)
class SamplingOutcome:
    indicator: IndicatorKind
    interval: float
    success_ratio: float
    compression_ratio: float
    weighted_sum: float
    raw_count: int
    sampled_count: int
    event_count: int
    detected_count: int
    delay_summary: DistributionSummary | None = None
    error_summary: DistributionSummary | None = None
    missed_delay_summary: DistributionSummary | None = None
    missed_error_summary: DistributionSummary | None = None
    matches: tuple[EventMatch, ...] = field(default=(), repr=False, compare=False)


def compression_ratio(raw_count: int, sampled_count: int) -> float:
    """Fractional reduction in record count, ``1 - sampled/raw``."""
    if raw_count <= 0:
        raise ValueError("raw_count must be positive")
    if not 0 <= sampled_count <= raw_count:
        raise ValueError("sampled_count must lie in [0, raw_count]")
    return 1.0 - sampled_count / raw_count


def _summary(values, bin_width: float) -> DistributionSummary | None:
    values = [v for v in values if not math.isnan(v)]
    return summarize(values, bin_width) if values else None


def evaluate(
    raw: IndicatorSeries,
    interval: float,
    weights: Weights = Weights(),
    *,
    phase: float = 0.0,
    window_pad: float | None = None,
    delay_bin: float = DELAY_BIN,
    error_bin: float = ERROR_BIN,
    events=None,
) -> SamplingOutcome:
    """Decimate ``raw`` at ``interval`` and score the result.

    ``window_pad`` defaults to the interval.  ``events`` may carry a cached
    :func:`detect_events` result for ``raw``.
    """
    sampled = decimate(raw, SamplingSpec(interval, phase))
    pad = interval if window_pad is None else window_pad
    matches = match_events(raw, sampled, pad, events=events)
    x_suc = success_ratio(matches)
    x_comp = compression_ratio(len(raw), len(sampled))
    detected = [m for m in matches if m.detected]
    missed = [m for m in matches if not m.detected]
    return SamplingOutcome(
        indicator=raw.kind,
        interval=interval,
        success_ratio=x_suc,
        compression_ratio=x_comp,
        weighted_sum=weights.combine(x_comp, x_suc),
        raw_count=len(raw),
        sampled_count=len(sampled),
        event_count=len(matches),
        detected_count=len(detected),
        delay_summary=_summary([m.delay for m in detected], delay_bin),
        error_summary=_summary([m.error for m in detected], error_bin),
        missed_delay_summary=_summary([m.delay for m in missed], delay_bin),
        missed_error_summary=_summary([m.error for m in missed], error_bin),
        matches=tuple(matches),
    )


def sweep(
    raw: IndicatorSeries,
    intervals: Sequence[float] = DEFAULT_INTERVALS,
    weights: Weights = Weights(),
    **kwargs,
) -> list[SamplingOutcome]:
    """One :func:`evaluate` per interval, in input order."""
    if not intervals:
        raise ValueError("interval grid is empty")
    events = detect_events(raw)
    return [evaluate(raw, k, weights, events=events, **kwargs) for k in intervals]


def _argmax_smallest(intervals: Sequence[float], scores: Sequence[float]) -> float:
    best = max(scores)
    return min(k for k, s in zip(intervals, scores) if s >= best - _TIE_TOL)


def recommend(outcomes: Sequence[SamplingOutcome]) -> float:
    """Interval with the largest weighted sum; ties go to the smallest interval."""
    if not outcomes:
        raise ValueError("no outcomes to recommend from")
    return _argmax_smallest([o.interval for o in outcomes], [o.weighted_sum for o in outcomes])


def uniform_scores(
    per_indicator: Mapping[IndicatorKind, Sequence[SamplingOutcome]],
    weights: Weights | None = None,
) -> dict[float, float]:
    """Mean weighted sum across indicators for each interval of the shared grid.

    With ``weights`` the per-outcome sums are recomputed from the ratios
    instead of taken as stored.
    """
    if not per_indicator:
        raise ValueError("no indicator sweeps given")
    grids = {kind: sorted(o.interval for o in outs) for kind, outs in per_indicator.items()}
    reference = next(iter(grids.values()))
    if any(g != reference for g in grids.values()):
        raise ValueError("indicator sweeps use different interval grids")
    if len(set(reference)) != len(reference):
        raise ValueError("interval grid contains duplicates")
    table: dict[float, list[float]] = {k: [] for k in reference}
    for outs in per_indicator.values():
        for o in outs:
            score = o.weighted_sum if weights is None else weights.combine(
                o.compression_ratio, o.success_ratio
            )
            table[o.interval].append(score)
    return {k: float(np.mean(v)) for k, v in table.items()}


def recommend_uniform(
    per_indicator: Mapping[IndicatorKind, Sequence[SamplingOutcome]],
    weights: Weights | None = None,
) -> float:
    """One interval for all indicators, maximizing the mean weighted sum."""
    scores = uniform_scores(per_indicator, weights)
    return _argmax_smallest(list(scores), list(scores.values()))
