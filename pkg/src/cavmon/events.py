"""Critical-event detection and raw-versus-sampled event matching."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from .indicators import IndicatorKind, IndicatorSeries


@dataclass(frozen=True)
class CriticalEvent:
    start: float
    end: float
    peak_time: float
    peak_value: float

    @property
    def duration(self) -> float:
        return self.end - self.start


class Outcome(enum.Enum):
    DETECTED = "detected"
    MISSED = "missed"


@dataclass(frozen=True)
class EventMatch:
    """How one raw event looks in the sampled stream.

    ``delay`` is sampled peak time minus raw peak time and ``error`` the
    absolute gap between raw peak and sampled extremum.  When no sampled
    point falls in the search window, ``sampled_peak_time`` and ``delay`` are
    NaN and the error is measured against the indicator's neutral value.
    """

    raw_event: CriticalEvent
    outcome: Outcome
    delay: float
    error: float
    sampled_peak_time: float
    sampled_peak_value: float

    @property
    def detected(self) -> bool:
        return self.outcome is Outcome.DETECTED

    def to_record(self) -> dict:
        rec = asdict(self.raw_event)
        rec["duration"] = self.raw_event.duration
        rec.update(
            outcome=self.outcome.value,
            delay=self.delay,
            error=self.error,
            sampled_peak_time=self.sampled_peak_time,
            sampled_peak_value=self.sampled_peak_value,
        )
        return rec


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Inclusive ``(first, last)`` index pairs of the True runs in ``mask``."""
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])]


def detect_events(series: IndicatorSeries) -> list[CriticalEvent]:
    """Maximal runs of consecutive critical points, in time order."""
    ts, vs = series.timestamps, series.values
    events = []
    for first, last in _runs(series.critical):
        peak = first + series.kind.argpeak(vs[first : last + 1])
        events.append(
            CriticalEvent(
                start=float(ts[first]),
                end=float(ts[last]),
                peak_time=float(ts[peak]),
                peak_value=float(vs[peak]),
            )
        )
    return events


def _baseline(kind: IndicatorKind, threshold: float) -> float:
    neutral = kind.neutral_value
    return threshold if neutral is None else neutral


def _attribute(ts: np.ndarray, events: list[CriticalEvent], pad: float) -> np.ndarray:
    """Owner event index for each sampled timestamp, or -1.

    A point inside an event's span belongs to that event; a point that only
    falls in padded windows goes to the event with the nearest peak time
    (earlier event on ties).
    """
    owner = np.full(len(ts), -1, dtype=int)
    best = np.full(len(ts), np.inf)
    for i, ev in enumerate(events):
        lo = np.searchsorted(ts, ev.start - pad, side="left")
        hi = np.searchsorted(ts, ev.end + pad, side="right")
        for j in range(lo, hi):
            t = ts[j]
            dist = -1.0 if ev.start <= t <= ev.end else abs(t - ev.peak_time)
            if dist < best[j]:
                best[j] = dist
                owner[j] = i
    return owner


def match_events(
    raw: IndicatorSeries,
    sampled: IndicatorSeries,
    window_pad: float,
    events: list[CriticalEvent] | None = None,
) -> list[EventMatch]:
    """Classify every raw event as detected or missed in ``sampled``.

    An event is detected when a sampled point inside ``[start, end]`` is
    critical.  The sampled extremum used for delay and error is searched in
    ``[start - window_pad, end + window_pad]`` for both outcomes.  Pass
    ``events`` to reuse a prior :func:`detect_events` result for ``raw``.
    """
    if window_pad < 0:
        raise ValueError("window_pad must be non-negative")
    kind, threshold = raw.kind, raw.threshold
    if events is None:
        events = detect_events(raw)
    ts, vs = sampled.timestamps, sampled.values
    owner = _attribute(ts, events, window_pad)
    matches = []
    for i, ev in enumerate(events):
        mine = np.flatnonzero(owner == i)
        if len(mine) == 0:
            base = _baseline(kind, threshold)
            matches.append(
                EventMatch(ev, Outcome.MISSED, math.nan, abs(ev.peak_value - base), math.nan, base)
            )
            continue
        inside = mine[(ts[mine] >= ev.start) & (ts[mine] <= ev.end)]
        detected = bool(kind.is_critical(vs[inside], threshold).any())
        peak = mine[kind.argpeak(vs[mine])]
        matches.append(
            EventMatch(
                ev,
                Outcome.DETECTED if detected else Outcome.MISSED,
                delay=float(ts[peak] - ev.peak_time),
                error=float(abs(ev.peak_value - vs[peak])),
                sampled_peak_time=float(ts[peak]),
                sampled_peak_value=float(vs[peak]),
            )
        )
    return matches


def success_ratio(matches: list[EventMatch]) -> float:
    """Fraction of raw events detected; 1.0 when there were none."""
    if not matches:
        return 1.0
    return sum(m.detected for m in matches) / len(matches)
