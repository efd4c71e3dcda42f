"""Synthetic telemetry with planted critical events.

Each planted event is a half-sine excursion of the given duration from a
quiet baseline toward a peak value.  Sensor noise is applied only outside
events so that every excursion that crosses its threshold forms exactly one
critical run.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .indicators import IndicatorKind
from .telemetry import DEFAULT_VEHICLE_WIDTH, TelemetryFrame, TelemetryLog

LANE_WIDTH = 3.4
FOLLOW_RANGE = 20.0


@dataclass(frozen=True)
class EventPlan:
    count: int
    duration: float
    peak: float

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("event count must be non-negative")
        if self.count and not self.duration > 0:
            raise ValueError("event duration must be positive")


# event counts are per DEFAULT_SPAN seconds and scale with log duration
DEFAULT_SPAN = 600.0
DEFAULT_PLANS = {
    IndicatorKind.SD: EventPlan(20, 2.1, -3.4),
    IndicatorKind.LPV: EventPlan(10, 19.99, 0.15),
    IndicatorKind.ITTC: EventPlan(20, 0.1, 2.995),
}


def default_plan(kind: IndicatorKind, duration: float) -> EventPlan:
    base = DEFAULT_PLANS[kind]
    count = int(base.count * duration / DEFAULT_SPAN)
    return EventPlan(count, base.duration, base.peak)


@dataclass(frozen=True)
class PlantedEvent:
    indicator: IndicatorKind
    start: float
    end: float
    peak_time: float
    peak_value: float


@dataclass(frozen=True)
class SynthResult:
    log: TelemetryLog
    events: tuple[PlantedEvent, ...] = field(default=())

    def events_for(self, kind: IndicatorKind) -> list[PlantedEvent]:
        return [e for e in self.events if e.indicator is kind]


def _place(rng: np.random.Generator, plan: EventPlan, duration: float) -> np.ndarray:
    """Start times of non-overlapping events, one per equal slot of the log."""
    if plan.count == 0:
        return np.empty(0)
    slot = duration / plan.count
    guard = 1.0
    room = slot - plan.duration - 2 * guard
    if room < 0:
        raise ValueError(
            f"{plan.count} events of {plan.duration} s do not fit in {duration} s"
        )
    return np.arange(plan.count) * slot + guard + rng.uniform(0, room, plan.count)


def _pulse(t: np.ndarray, starts: np.ndarray, width: float) -> np.ndarray:
    out = np.zeros_like(t)
    for s in starts:
        lo, hi = np.searchsorted(t, [s, s + width])
        out[lo:hi] = np.sin(math.pi * (t[lo:hi] - s) / width)
    return out


def generate(
    rate: float = 50.0,
    duration: float = 600.0,
    seed: int = 0,
    plans: dict[IndicatorKind, EventPlan] | None = None,
    *,
    vehicle_width: float = DEFAULT_VEHICLE_WIDTH,
    noise: float = 1.0,
) -> SynthResult:
    """Build a deterministic log at ``rate`` Hz lasting ``duration`` seconds.

    ``plans`` overrides the defaults per indicator (:data:`DEFAULT_PLANS`
    with counts scaled to ``duration``); ``noise`` scales the baseline sensor
    noise.
    """
    if not (rate > 0 and duration > 0):
        raise ValueError("rate and duration must be positive")
    plans = {**{k: default_plan(k, duration) for k in IndicatorKind}, **(plans or {})}
    rng = np.random.default_rng(seed)
    n = int(math.floor(duration * rate + 1e-9))
    t = np.arange(n) / rate
    events = []

    sd = plans[IndicatorKind.SD]
    sd_starts = _place(rng, sd, duration)
    p = _pulse(t, sd_starts, sd.duration)
    quiet = p == 0
    accel = sd.peak * p + quiet * rng.normal(0, 0.1 * noise, n)

    lpv = plans[IndicatorKind.LPV]
    base_margin = (LANE_WIDTH - vehicle_width) / 2
    lpv_starts = _place(rng, lpv, duration)
    shift = np.zeros(n)
    for i, s in enumerate(lpv_starts):
        side = 1.0 if i % 2 == 0 else -1.0
        shift += side * (base_margin - lpv.peak) * _pulse(t, np.array([s]), lpv.duration)
    shift += (shift == 0) * rng.normal(0, 0.02 * noise, n)
    left = LANE_WIDTH / 2 + shift
    right = LANE_WIDTH / 2 - shift

    ittc_plan = plans[IndicatorKind.ITTC]
    ittc_starts = _place(rng, ittc_plan, duration)
    p = _pulse(t, ittc_starts, ittc_plan.duration)
    quiet = p == 0
    target_range = FOLLOW_RANGE + quiet * rng.normal(0, 0.05 * noise, n)
    range_rate = -ittc_plan.peak * p * target_range + quiet * rng.normal(0, 0.2 * noise, n)

    for kind, plan, starts in (
        (IndicatorKind.SD, sd, sd_starts),
        (IndicatorKind.LPV, lpv, lpv_starts),
        (IndicatorKind.ITTC, ittc_plan, ittc_starts),
    ):
        for s in starts:
            events.append(PlantedEvent(kind, float(s), float(s + plan.duration), float(s + plan.duration / 2), plan.peak))

    frames = tuple(
        TelemetryFrame(
            timestamp=float(t[i]),
            long_accel=float(accel[i]),
            left_lane_position=float(left[i]),
            left_lane_quality=3,
            right_lane_position=float(right[i]),
            right_lane_quality=3,
            target_range=float(target_range[i]),
            target_range_rate=float(range_rate[i]),
            target_range_accel=0.0,
            target_status=1,
        )
        for i in range(n)
    )
    events.sort(key=lambda e: (e.start, e.indicator.value))
    return SynthResult(TelemetryLog(frames, vehicle_width=vehicle_width, source="synthetic"), tuple(events))


def write_events(events, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["indicator", "start", "end", "peak_time", "peak_value"])
        for e in events:
            writer.writerow([e.indicator.value, repr(e.start), repr(e.end), repr(e.peak_time), repr(e.peak_value)])
