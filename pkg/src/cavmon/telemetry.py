"""Ingestion and quality filtering of CAV sensor logs.

A log is a delimiter-separated text file with one header row and one frame
per row.  Column names default to the field identifiers used by the test
vehicle's data export (``timestamp``, ``longAccel``, ``leftLanePosition``...)
and can be remapped with a ``{field: column}`` dictionary.  Empty cells mean
the field is absent for that frame.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import LogFormatError

# Mean width of the test vehicle used for the published field data, in meters.
DEFAULT_VEHICLE_WIDTH = 2.038

DEFAULT_COLUMNS: dict[str, str] = {
    "timestamp": "timestamp",
    "long_accel": "longAccel",
    "left_lane_position": "leftLanePosition",
    "left_lane_quality": "leftLaneQuality",
    "right_lane_position": "rightLanePosition",
    "right_lane_quality": "rightLaneQuality",
    "target_range": "targetRange",
    "target_range_rate": "targetRangeRate",
    "target_range_accel": "targetRangeAccel",
    "target_status": "targetStatus",
}

CHASSIS_FIELDS = ("long_accel",)
VISION_FIELDS = (
    "left_lane_position",
    "left_lane_quality",
    "right_lane_position",
    "right_lane_quality",
)
RADAR_FIELDS = ("target_range", "target_range_rate", "target_range_accel", "target_status")
INT_FIELDS = frozenset({"left_lane_quality", "right_lane_quality", "target_status"})
NON_NEGATIVE_FIELDS = ("left_lane_position", "right_lane_position", "target_range")


@dataclass(frozen=True)
class TelemetryFrame:
    """One timestamped multi-sensor record.  Absent fields are ``None``."""

    timestamp: float
    long_accel: float | None = None
    left_lane_position: float | None = None
    left_lane_quality: int | None = None
    right_lane_position: float | None = None
    right_lane_quality: int | None = None
    target_range: float | None = None
    target_range_rate: float | None = None
    target_range_accel: float | None = None
    target_status: int | None = None

    def __post_init__(self):
        if not (math.isfinite(self.timestamp) and self.timestamp >= 0):
            raise ValueError(f"timestamp must be finite and non-negative, got {self.timestamp}")
        for name in NON_NEGATIVE_FIELDS:
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")

    def has_sensor_data(self) -> bool:
        return any(
            getattr(self, name) is not None
            for name in CHASSIS_FIELDS + VISION_FIELDS + RADAR_FIELDS
        )


@dataclass(frozen=True)
class TelemetryLog:
    """An ordered, deduplicated sequence of frames from one vehicle."""

    frames: tuple[TelemetryFrame, ...]
    vehicle_width: float = DEFAULT_VEHICLE_WIDTH
    source: str | None = None
    dropped_rows: int = 0

    def __post_init__(self):
        if not self.vehicle_width > 0:
            raise ValueError(f"vehicle_width must be positive, got {self.vehicle_width}")
        object.__setattr__(self, "frames", tuple(self.frames))
        ts = self.timestamps
        if len(ts) > 1 and not np.all(np.diff(ts) > 0):
            raise ValueError("frame timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([f.timestamp for f in self.frames], dtype=float)

    def column(self, name: str) -> np.ndarray:
        """Field values as a float array with NaN where the field is absent."""
        return np.array(
            [np.nan if (v := getattr(f, name)) is None else v for f in self.frames],
            dtype=float,
        )

    @property
    def nominal_rate(self) -> float:
        return nominal_rate(self)


@dataclass(frozen=True)
class QualityPolicy:
    """Rules for discarding noisy vision and radar readings.

    Lane fields on a side are cleared when that side's quality grade is below
    ``min_lane_quality``.  Radar fields are cleared when ``target_status`` is
    not in ``valid_target_status`` (``None`` accepts any non-zero code) or
    when ``|target_range_accel|`` exceeds ``max_abs_range_accel``.  A missing
    quality or status value is not grounds for clearing.
    """

    min_lane_quality: int = 2
    valid_target_status: frozenset[int] | None = None
    max_abs_range_accel: float | None = None


def _parse_value(name: str, text: str):
    if name in INT_FIELDS:
        number = float(text)
        if not number.is_integer():
            raise ValueError(f"{name} must be an integer, got {text!r}")
        return int(number)
    number = float(text)
    if not math.isfinite(number):
        raise ValueError(f"{name} must be finite, got {text!r}")
    return number


def frames_from_rows(
    rows: Iterable[Mapping[str, str]], columns: Mapping[str, str]
) -> tuple[list[TelemetryFrame], int]:
    """Parse row dictionaries into frames, returning ``(frames, dropped)``.

    Rows with an unparseable or invalid value, an empty timestamp, or no
    sensor data at all are dropped and counted.
    """
    frames = []
    dropped = 0
    for row in rows:
        values = {}
        try:
            for name, col in columns.items():
                text = (row.get(col) or "").strip()
                if text:
                    values[name] = _parse_value(name, text)
            if "timestamp" not in values:
                raise ValueError("empty timestamp")
            frame = TelemetryFrame(**values)
        except ValueError:
            dropped += 1
            continue
        if not frame.has_sensor_data():
            dropped += 1
            continue
        frames.append(frame)
    return frames, dropped


def _dedupe_sorted(frames: list[TelemetryFrame]) -> list[TelemetryFrame]:
    # stable sort: equal timestamps keep file order, so the last one wins
    ordered = sorted(frames, key=lambda f: f.timestamp)
    out: list[TelemetryFrame] = []
    for frame in ordered:
        if out and out[-1].timestamp == frame.timestamp:
            out[-1] = frame
        else:
            out.append(frame)
    return out


def load_log(
    path: str | Path,
    columns: Mapping[str, str] | None = None,
    *,
    delimiter: str = ",",
    vehicle_width: float = DEFAULT_VEHICLE_WIDTH,
) -> TelemetryLog:
    """Read a delimiter-separated telemetry file.

    ``columns`` overrides entries of :data:`DEFAULT_COLUMNS`.  Fields whose
    column is missing from the header are treated as absent on every frame,
    but the timestamp column is required.
    """
    mapping = dict(DEFAULT_COLUMNS)
    if columns:
        unknown = set(columns) - set(mapping)
        if unknown:
            raise ValueError(f"unknown fields in column map: {sorted(unknown)}")
        mapping.update(columns)
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh, delimiter=delimiter)
            header = reader.fieldnames or []
            if mapping["timestamp"] not in header:
                raise LogFormatError(f"{path}: missing timestamp column {mapping['timestamp']!r}")
            present = {name: col for name, col in mapping.items() if col in header}
            frames, dropped = frames_from_rows(reader, present)
    except OSError as exc:
        raise LogFormatError(f"cannot read {path}: {exc}") from exc
    return TelemetryLog(
        frames=tuple(_dedupe_sorted(frames)),
        vehicle_width=vehicle_width,
        source=str(path),
        dropped_rows=dropped,
    )


def _format(value) -> str:
    if value is None:
        return ""
    return repr(value)


def write_log(
    log: TelemetryLog,
    path: str | Path,
    columns: Mapping[str, str] | None = None,
    *,
    delimiter: str = ",",
) -> None:
    """Write ``log`` in the same delimited format :func:`load_log` reads."""
    mapping = dict(DEFAULT_COLUMNS)
    if columns:
        mapping.update(columns)
    names = [f.name for f in fields(TelemetryFrame)]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow([mapping[n] for n in names])
        for frame in log.frames:
            writer.writerow([_format(getattr(frame, n)) for n in names])


def write_jsonl(log: TelemetryLog, path: str | Path) -> None:
    """Export one JSON object per frame; absent fields are omitted."""
    with Path(path).open("w") as fh:
        for frame in log.frames:
            record = {k: v for k, v in vars(frame).items() if v is not None}
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def filter_quality(log: TelemetryLog, policy: QualityPolicy | None = None) -> TelemetryLog:
    """Clear vision/radar fields that fail ``policy``; frames are never removed."""
    policy = policy or QualityPolicy()
    out = []
    for frame in log.frames:
        changes = {}
        if frame.left_lane_quality is not None and frame.left_lane_quality < policy.min_lane_quality:
            changes.update(left_lane_position=None, left_lane_quality=None)
        if frame.right_lane_quality is not None and frame.right_lane_quality < policy.min_lane_quality:
            changes.update(right_lane_position=None, right_lane_quality=None)
        if _radar_invalid(frame, policy):
            changes.update(dict.fromkeys(RADAR_FIELDS))
        out.append(replace(frame, **changes) if changes else frame)
    return replace(log, frames=tuple(out))


def _radar_invalid(frame: TelemetryFrame, policy: QualityPolicy) -> bool:
    status = frame.target_status
    if status is not None:
        if policy.valid_target_status is None:
            if status == 0:
                return True
        elif status not in policy.valid_target_status:
            return True
    accel = frame.target_range_accel
    limit = policy.max_abs_range_accel
    return limit is not None and accel is not None and abs(accel) > limit


def nominal_rate(log: TelemetryLog) -> float:
    """Sampling rate in Hz, the reciprocal of the median inter-frame gap."""
    if len(log.frames) < 2:
        raise ValueError("nominal rate needs at least two frames")
    return 1.0 / float(np.median(np.diff(log.timestamps)))
