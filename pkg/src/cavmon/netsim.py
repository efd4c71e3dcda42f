"""Discrete-event simulation of the OBU -> RSU -> TMC monitoring path.

Wire format (little-endian), version 1::

    header, 24 bytes
      0  2s   magic b"CV"
      2  u8   format version (1)
      3  u8   reserved, zero
      4  u32  vehicle id
      8  u64  sequence number
     16  f64  generation time, simulation clock seconds
    record, 40 bytes, repeated
      0  f64  frame timestamp
      8  f64  longitudinal acceleration
     16  f64  left lane position
     24  f64  right lane position
     32  f64  inverse time to collision

An absent field is encoded as NaN.  The record count is implied by the
message length.  The radar pair (range, range rate) is reduced to inverse TTC
on the vehicle because the three indicators need only that ratio.
"""

from __future__ import annotations

import heapq
import math
import struct
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import WireFormatError
from .indicators import (
    IndicatorKind,
    IndicatorSeries,
    inverse_ttc,
    lane_margin,
)
from .sampling import SamplingSpec, select_indices
from .telemetry import TelemetryFrame, TelemetryLog

MAGIC = b"CV"
VERSION = 1
HEADER = struct.Struct("<2sBBIQd")
RECORD = struct.Struct("<5d")
HEADER_BYTES = HEADER.size
RECORD_BYTES = RECORD.size
assert HEADER_BYTES == 24 and RECORD_BYTES == 40


@dataclass(frozen=True)
class WireRecord:
    """The indicator-relevant part of one sampled frame."""

    timestamp: float
    long_accel: float | None = None
    left_lane_position: float | None = None
    right_lane_position: float | None = None
    inverse_ttc: float | None = None

    @classmethod
    def from_frame(cls, frame: TelemetryFrame, closing_negative: bool = True) -> "WireRecord":
        ittc = None
        if (
            frame.target_range is not None
            and frame.target_range > 0
            and frame.target_range_rate is not None
        ):
            ittc = float(inverse_ttc(frame.target_range, frame.target_range_rate, closing_negative))
        return cls(
            frame.timestamp,
            frame.long_accel,
            frame.left_lane_position,
            frame.right_lane_position,
            ittc,
        )

    def pack(self) -> bytes:
        return RECORD.pack(*(math.nan if v is None else v for v in self._values()))

    def _values(self):
        return (
            self.timestamp,
            self.long_accel,
            self.left_lane_position,
            self.right_lane_position,
            self.inverse_ttc,
        )

    @classmethod
    def unpack(cls, chunk: bytes) -> "WireRecord":
        ts, *rest = RECORD.unpack(chunk)
        if math.isnan(ts):
            raise WireFormatError("record timestamp is NaN")
        return cls(ts, *(None if math.isnan(v) else v for v in rest))


@dataclass(frozen=True)
class V2xMessage:
    vehicle_id: int
    sequence: int
    generated_at: float
    payload: tuple[WireRecord, ...]
    wire: bytes = field(repr=False)

    @property
    def encoded_size(self) -> int:
        return len(self.wire)


def message_size(n_records: int) -> int:
    return HEADER_BYTES + RECORD_BYTES * n_records


def encode(
    records: Sequence[WireRecord], vehicle_id: int, sequence: int, generated_at: float
) -> V2xMessage:
    if not records:
        raise ValueError("cannot encode an empty batch")
    stamps = [r.timestamp for r in records]
    if any(b < a for a, b in zip(stamps, stamps[1:])):
        raise ValueError("batch timestamps must be sorted")
    header = HEADER.pack(MAGIC, VERSION, 0, vehicle_id, sequence, generated_at)
    wire = header + b"".join(r.pack() for r in records)
    return V2xMessage(vehicle_id, sequence, generated_at, tuple(records), wire)


def parse(data: bytes) -> V2xMessage:
    """Rebuild a message from its wire bytes, raising :class:`WireFormatError`."""
    if len(data) < HEADER_BYTES + RECORD_BYTES:
        raise WireFormatError(f"message too short ({len(data)} bytes)")
    body = len(data) - HEADER_BYTES
    if body % RECORD_BYTES:
        raise WireFormatError(f"payload length {body} is not a multiple of {RECORD_BYTES}")
    magic, version, _, vehicle_id, sequence, generated_at = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise WireFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise WireFormatError(f"unsupported format version {version}")
    records = tuple(
        WireRecord.unpack(data[off : off + RECORD_BYTES])
        for off in range(HEADER_BYTES, len(data), RECORD_BYTES)
    )
    return V2xMessage(vehicle_id, sequence, generated_at, records, bytes(data))


def decode(data: bytes) -> tuple[WireRecord, ...]:
    return parse(data).payload


class TopicStore:
    """In-memory stand-in for the TMC message broker, keyed by vehicle."""

    def __init__(self):
        self.records: dict[int, list[WireRecord]] = {}
        self.last_sequence: dict[int, int] = {}
        self.reordered: list[tuple[int, int]] = []

    def receive(self, data: bytes) -> V2xMessage:
        """Decode and store a message.  A sequence regression is flagged, not rejected."""
        msg = parse(data)
        last = self.last_sequence.get(msg.vehicle_id)
        if last is not None and msg.sequence <= last:
            self.reordered.append((msg.vehicle_id, msg.sequence))
        else:
            self.last_sequence[msg.vehicle_id] = msg.sequence
        self.records.setdefault(msg.vehicle_id, []).extend(msg.payload)
        return msg

    def series(self, vehicle_id: int, vehicle_width: float) -> dict[IndicatorKind, IndicatorSeries]:
        """Recompute the indicator series from everything stored for a vehicle."""
        by_time = {r.timestamp: r for r in self.records.get(vehicle_id, [])}
        recs = [by_time[t] for t in sorted(by_time)]
        ts = np.array([r.timestamp for r in recs], dtype=float)

        def col(name):
            return np.array([np.nan if (v := getattr(r, name)) is None else v for r in recs], dtype=float)

        out = {}
        accel = col("long_accel")
        ok = ~np.isnan(accel)
        if ok.any():
            out[IndicatorKind.SD] = IndicatorSeries(IndicatorKind.SD, ts[ok], accel[ok], IndicatorKind.SD.default_threshold)
        left, right = col("left_lane_position"), col("right_lane_position")
        ok = ~(np.isnan(left) | np.isnan(right))
        if ok.any():
            out[IndicatorKind.LPV] = IndicatorSeries(
                IndicatorKind.LPV,
                ts[ok],
                lane_margin(left[ok], right[ok], vehicle_width),
                IndicatorKind.LPV.default_threshold,
            )
        ittc = col("inverse_ttc")
        ok = ~np.isnan(ittc)
        if ok.any():
            out[IndicatorKind.ITTC] = IndicatorSeries(IndicatorKind.ITTC, ts[ok], ittc[ok], IndicatorKind.ITTC.default_threshold)
        return out


@dataclass(frozen=True)
class ChannelModel:
    """FIFO uplink with a bounded system size (in service + waiting)."""

    capacity: float
    queue_limit: int | None = 1000
    propagation_delay: float = 0.01

    def __post_init__(self):
        if not self.capacity > 0:
            raise ValueError("capacity must be positive")
        if self.queue_limit is not None and self.queue_limit < 1:
            raise ValueError("queue_limit must be at least 1")
        if not self.propagation_delay >= 0:
            raise ValueError("propagation_delay must be non-negative")

    def transmission_time(self, size_bytes: int) -> float:
        return size_bytes * 8 / self.capacity


CHANNEL_PRESETS = {
    "lte": ChannelModel(capacity=23.6e6),
    "wave": ChannelModel(capacity=27e6),
}


def channel_preset(name: str) -> ChannelModel:
    try:
        return CHANNEL_PRESETS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown channel preset {name!r}; choose from {sorted(CHANNEL_PRESETS)}") from None


_DEPART, _ARRIVE = 0, 1
DROPPED = -math.inf


def run_channel(
    arrivals: Sequence[tuple[float, int]],
    channel: ChannelModel,
    horizon: float | None = None,
) -> list[float]:
    """Serve ``(arrival_time, size_bytes)`` messages FIFO over ``channel``.

    Returns the delivery time of each message, :data:`DROPPED` for drop-tail
    losses and NaN for messages still in the system at ``horizon``.  A
    departure at the same instant as an arrival frees its slot first.
    """
    events: list[tuple[float, int, int]] = []
    for i, (t, _) in enumerate(arrivals):
        heapq.heappush(events, (t, _ARRIVE, i))
    delivered = [math.nan] * len(arrivals)
    waiting: deque[int] = deque()
    serving: int | None = None
    limit = math.inf if channel.queue_limit is None else channel.queue_limit

    def start(i: int, now: float):
        heapq.heappush(events, (now + channel.transmission_time(arrivals[i][1]), _DEPART, i))

    while events:
        now, kind, i = heapq.heappop(events)
        if horizon is not None and now > horizon:
            break
        if kind == _ARRIVE:
            in_system = len(waiting) + (serving is not None)
            if in_system >= limit:
                delivered[i] = DROPPED
            elif serving is None:
                serving = i
                start(i, now)
            else:
                waiting.append(i)
        else:
            arrival = now + channel.propagation_delay
            if horizon is None or arrival <= horizon:
                delivered[i] = arrival
            serving = waiting.popleft() if waiting else None
            if serving is not None:
                start(serving, now)
    return delivered


@dataclass(frozen=True)
class PipelineReport:
    generated: int
    delivered: int
    dropped: int
    rejected: int
    in_queue: int
    latencies: tuple[float, ...]
    frame_latencies: tuple[float, ...]
    delivered_bytes: int
    delivered_record_bytes: int
    duration: float
    delivered_timestamps: tuple[float, ...]
    reordered: int
    tmc_series: dict = field(repr=False)

    @property
    def throughput(self) -> float:
        """Delivered bytes per second of simulated time."""
        return self.delivered_bytes / self.duration if self.duration > 0 else 0.0

    @property
    def record_throughput(self) -> float:
        return self.delivered_record_bytes / self.duration if self.duration > 0 else 0.0

    def to_record(self) -> dict:
        lat = np.array(self.latencies) if self.latencies else np.array([np.nan])
        flat = np.array(self.frame_latencies) if self.frame_latencies else np.array([np.nan])
        return {
            "generated": self.generated,
            "delivered": self.delivered,
            "dropped": self.dropped,
            "rejected": self.rejected,
            "in_queue": self.in_queue,
            "reordered": self.reordered,
            "delivered_bytes": self.delivered_bytes,
            "duration_s": self.duration,
            "throughput_Bps": self.throughput,
            "record_throughput_Bps": self.record_throughput,
            "latency_mean_s": float(np.mean(lat)),
            "latency_max_s": float(np.max(lat)),
            "frame_latency_mean_s": float(np.mean(flat)),
            "frame_latency_max_s": float(np.max(flat)),
        }


def offered_load(raw_rate: float, kept: float) -> float:
    """Record payload bits per second entering the uplink."""
    return raw_rate * kept * RECORD_BYTES * 8


def sampled_log(log: TelemetryLog, sampling: SamplingSpec) -> TelemetryLog:
    """The frames an OBU would keep under ``sampling``."""
    idx = select_indices(log.timestamps, sampling)
    return TelemetryLog(
        tuple(log.frames[i] for i in idx), log.vehicle_width, log.source, log.dropped_rows
    )


def simulate(
    log: TelemetryLog,
    sampling: SamplingSpec,
    batch_interval: float,
    channel: ChannelModel,
    *,
    vehicle_id: int = 1,
    drain: bool = True,
    tamper: Callable[[bytes], bytes] | None = None,
    closing_negative: bool = True,
) -> PipelineReport:
    """Run the sampling, batching, uplink and TMC stages over ``log``.

    Batches close at ``t0 + j * batch_interval`` (``t0`` is the first frame
    time) and carry the kept frames since the previous tick.  With ``drain``
    false the run stops at the last tick and unfinished messages count as
    ``in_queue``.  ``tamper`` rewrites wire bytes in transit; it is a test
    hook for negative controls.
    """
    if batch_interval < sampling.interval:
        raise ValueError("batch_interval must not be shorter than the sampling interval")
    if len(log) == 0:
        raise ValueError("empty log")
    frames = sampled_log(log, sampling).frames
    t0 = log.frames[0].timestamp
    batches: dict[int, list[WireRecord]] = {}
    for frame in frames:
        tick = max(1, math.ceil((frame.timestamp - t0) / batch_interval - 1e-9))
        batches.setdefault(tick, []).append(WireRecord.from_frame(frame, closing_negative))
    messages = [
        encode(recs, vehicle_id, seq, t0 + tick * batch_interval)
        for seq, (tick, recs) in enumerate(sorted(batches.items()))
    ]
    last_tick = max(batches) if batches else 1
    horizon = None if drain else t0 + last_tick * batch_interval
    delivered_at = run_channel([(m.generated_at, m.encoded_size) for m in messages], channel, horizon)

    store = TopicStore()
    order = sorted(
        (t, i) for i, t in enumerate(delivered_at) if not math.isnan(t) and t != DROPPED
    )
    latencies, frame_latencies, stamps = [], [], []
    delivered = rejected = nbytes = 0
    for t, i in order:
        msg = messages[i]
        data = tamper(msg.wire) if tamper else msg.wire
        try:
            got = store.receive(data)
        except WireFormatError:
            rejected += 1
            continue
        delivered += 1
        nbytes += len(data)
        latencies.append(t - msg.generated_at)
        frame_latencies.extend(t - r.timestamp for r in got.payload)
        stamps.extend(r.timestamp for r in got.payload)
    dropped = sum(t == DROPPED for t in delivered_at)
    in_queue = sum(math.isnan(t) for t in delivered_at)
    return PipelineReport(
        generated=len(messages),
        delivered=delivered,
        dropped=dropped,
        rejected=rejected,
        in_queue=in_queue,
        latencies=tuple(latencies),
        frame_latencies=tuple(frame_latencies),
        delivered_bytes=nbytes,
        delivered_record_bytes=nbytes - HEADER_BYTES * delivered,
        duration=last_tick * batch_interval,
        delivered_timestamps=tuple(sorted(stamps)),
        reordered=len(store.reordered),
        tmc_series=store.series(vehicle_id, log.vehicle_width),
    )


def end_to_end_check(report: PipelineReport, direct: IndicatorSeries) -> bool:
    """True iff the TMC-side series equals ``direct`` on every delivered frame."""
    keep = np.isin(direct.timestamps, np.array(report.delivered_timestamps))
    expected_t = direct.timestamps[keep]
    expected_v = direct.values[keep]
    got = report.tmc_series.get(direct.kind)
    if got is None:
        return expected_t.size == 0
    return bool(
        np.array_equal(got.timestamps, expected_t) and np.array_equal(got.values, expected_v)
    )
