"""Safety performance indicator series computed from telemetry.

Three indicators are supported:

* severe deceleration (SD): longitudinal acceleration, critical at or below
  -2.94 m/s^2;
* lateral position variation (LPV): the smaller of the two margins between
  the vehicle body and a lane marking, critical at or below a margin
  threshold (0.2 m by default);
* inverse time to collision (ITTC): closing speed over gap, critical at or
  above 1.76 1/s.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NoDataError
from .telemetry import TelemetryLog

SD_THRESHOLD = -2.94
ITTC_THRESHOLD = 1.76
LPV_THRESHOLD = 0.2


class IndicatorKind(enum.Enum):
    SD = "sd"
    LPV = "lpv"
    ITTC = "ittc"

    @property
    def lower_is_critical(self) -> bool:
        return self is not IndicatorKind.ITTC

    @property
    def default_threshold(self) -> float:
        return {
            IndicatorKind.SD: SD_THRESHOLD,
            IndicatorKind.LPV: LPV_THRESHOLD,
            IndicatorKind.ITTC: ITTC_THRESHOLD,
        }[self]

    @property
    def neutral_value(self) -> float | None:
        """Reference value used when nothing was observed; ``None`` means the threshold."""
        return None if self is IndicatorKind.LPV else 0.0

    def is_critical(self, values, threshold: float):
        values = np.asarray(values, dtype=float)
        if self.lower_is_critical:
            return values <= threshold
        return values >= threshold

    def argpeak(self, values) -> int:
        """Index of the most critical value; the earliest wins on ties."""
        values = np.asarray(values, dtype=float)
        return int(np.argmin(values) if self.lower_is_critical else np.argmax(values))


@dataclass(frozen=True, eq=False)
class IndicatorSeries:
    """Timestamped scalar indicator values with a criticality threshold.

    ``skipped`` counts source frames that could not contribute a value.
    """

    kind: IndicatorKind
    timestamps: np.ndarray
    values: np.ndarray
    threshold: float
    skipped: int = 0

    def __post_init__(self):
        ts = np.array(self.timestamps, dtype=float)
        vs = np.array(self.values, dtype=float)
        if ts.shape != vs.shape or ts.ndim != 1:
            raise ValueError("timestamps and values must be 1-d arrays of equal length")
        if len(ts) > 1 and not np.all(np.diff(ts) > 0):
            raise ValueError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(vs)):
            raise ValueError("indicator values must be finite")
        if not np.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        ts.flags.writeable = False
        vs.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vs)

    def __len__(self) -> int:
        return len(self.timestamps)

    def __eq__(self, other):
        if not isinstance(other, IndicatorSeries):
            return NotImplemented
        return (
            self.kind is other.kind
            and self.threshold == other.threshold
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.values, other.values)
        )

    @property
    def critical(self) -> np.ndarray:
        return self.kind.is_critical(self.values, self.threshold)

    def take(self, index) -> "IndicatorSeries":
        """Sub-series at the given (sorted) indices."""
        return IndicatorSeries(
            self.kind, self.timestamps[index], self.values[index], self.threshold
        )

    def write_csv(self, path: str | Path, delimiter: str = ",") -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
            writer.writerow(["timestamp", "value", "critical"])
            for t, v, c in zip(self.timestamps, self.values, self.critical):
                writer.writerow([repr(float(t)), repr(float(v)), int(c)])


def compute_sd(log: TelemetryLog, threshold: float = SD_THRESHOLD) -> IndicatorSeries:
    ts = log.timestamps
    accel = log.column("long_accel")
    ok = ~np.isnan(accel)
    if not ok.any():
        raise NoDataError("no longitudinal acceleration data in log")
    return IndicatorSeries(
        IndicatorKind.SD, ts[ok], accel[ok], threshold, skipped=int((~ok).sum())
    )


def lane_margin(left, right, vehicle_width: float):
    """Smallest gap between the vehicle body and either lane marking.

    ``left``/``right`` are distances from the vehicle center to each marking.
    """
    if not vehicle_width > 0:
        raise ValueError(f"vehicle_width must be positive, got {vehicle_width}")
    half = vehicle_width / 2.0
    return np.minimum(np.abs(np.asarray(left) - half), np.abs(np.asarray(right) - half))


def compute_lpv(
    log: TelemetryLog,
    threshold: float = LPV_THRESHOLD,
    vehicle_width: float | None = None,
) -> IndicatorSeries:
    width = log.vehicle_width if vehicle_width is None else vehicle_width
    if not width > 0:
        raise ValueError(f"vehicle_width must be positive, got {width}")
    left = log.column("left_lane_position")
    right = log.column("right_lane_position")
    ok = ~(np.isnan(left) | np.isnan(right))
    if not ok.any():
        raise NoDataError("no frames with both lane positions")
    return IndicatorSeries(
        IndicatorKind.LPV,
        log.timestamps[ok],
        lane_margin(left[ok], right[ok], width),
        threshold,
        skipped=int((~ok).sum()),
    )


def inverse_ttc(target_range, target_range_rate, closing_negative: bool = True):
    """Closing speed divided by the gap.

    With ``closing_negative`` the range rate is d(range)/dt, so an approaching
    target has a negative rate and a positive result.
    """
    rate = np.asarray(target_range_rate, dtype=float)
    closing = -rate if closing_negative else rate
    return closing / np.asarray(target_range, dtype=float)


def compute_ittc(
    log: TelemetryLog,
    threshold: float = ITTC_THRESHOLD,
    closing_negative: bool = True,
) -> IndicatorSeries:
    rng = log.column("target_range")
    rate = log.column("target_range_rate")
    ok = ~(np.isnan(rng) | np.isnan(rate)) & (rng > 0)
    if not ok.any():
        raise NoDataError("no frames with a radar target")
    return IndicatorSeries(
        IndicatorKind.ITTC,
        log.timestamps[ok],
        inverse_ttc(rng[ok], rate[ok], closing_negative),
        threshold,
        skipped=int((~ok).sum()),
    )


def compute(kind: IndicatorKind, log: TelemetryLog, threshold: float | None = None) -> IndicatorSeries:
    """Dispatch to the compute function for ``kind``."""
    threshold = kind.default_threshold if threshold is None else threshold
    func = {
        IndicatorKind.SD: compute_sd,
        IndicatorKind.LPV: compute_lpv,
        IndicatorKind.ITTC: compute_ittc,
    }[kind]
    return func(log, threshold)
