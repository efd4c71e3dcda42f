import math
import random

import pytest

from cavmon.errors import WireFormatError
from cavmon.indicators import IndicatorKind, compute, compute_ittc, compute_lpv, compute_sd
from cavmon.netsim import (
    CHANNEL_PRESETS,
    DROPPED,
    ChannelModel,
    TopicStore,
    WireRecord,
    channel_preset,
    decode,
    encode,
    end_to_end_check,
    message_size,
    offered_load,
    parse,
    run_channel,
    sampled_log,
    simulate,
)
from cavmon.sampling import SamplingSpec, kept_fraction
from cavmon.telemetry import TelemetryFrame


def _records(n, t0=0.0):
    return [WireRecord(t0 + i * 0.2, -1.0 * i, 1.6, None, 0.25) for i in range(n)]


def test_sizes():
    assert encode(_records(1), 7, 0, 0.0).encoded_size == 64
    assert encode(_records(10), 7, 0, 0.0).encoded_size == 424
    assert message_size(3) == 144


def test_roundtrip():
    recs = _records(3)
    msg = encode(recs, 9, 42, 1.5)
    back = parse(msg.wire)
    assert back.payload == tuple(recs)
    assert (back.vehicle_id, back.sequence, back.generated_at) == (9, 42, 1.5)
    assert decode(msg.wire) == tuple(recs)


def test_header_layout():
    wire = encode(_records(1), 0x01020304, 5, 0.0).wire
    assert wire[:4] == b"CV\x01\x00"
    assert wire[4:8] == bytes([4, 3, 2, 1])
    assert wire[8:16] == (5).to_bytes(8, "little")


def test_empty_batch_rejected():
    with pytest.raises(ValueError):
        encode([], 1, 0, 0.0)


@pytest.mark.parametrize("cut", [1, 23, 30, 63])
def test_truncated(cut):
    wire = encode(_records(1), 1, 0, 0.0).wire
    with pytest.raises(WireFormatError):
        parse(wire[:cut])


def test_garbled_magic():
    wire = bytearray(encode(_records(2), 1, 0, 0.0).wire)
    wire[0] = ord("X")
    with pytest.raises(WireFormatError):
        parse(bytes(wire))


def test_sequence_regression_flagged():
    store = TopicStore()
    store.receive(encode(_records(1, 1.0), 1, 5, 1.0).wire)
    store.receive(encode(_records(1, 0.0), 1, 4, 0.5).wire)
    assert store.reordered == [(1, 4)]
    assert len(store.records[1]) == 2


def test_record_from_frame():
    frame = TelemetryFrame(1.0, long_accel=-2.0, target_range=5.0, target_range_rate=-10.0)
    rec = WireRecord.from_frame(frame)
    assert rec.inverse_ttc == 2.0 and rec.left_lane_position is None


def test_fifo_hand_model():
    ch = channel_preset("wave")
    tx = 424 * 8 / 27e6
    got = run_channel([(0.0, 424)] * 3, ch)
    for i, t in enumerate(got, start=1):
        assert abs(t - (i * tx + ch.propagation_delay)) <= 1e-9


def test_drop_tail():
    ch = ChannelModel(capacity=1e6, queue_limit=1)
    got = run_channel([(0.0, 100), (0.0, 100)], ch)
    assert got[1] == DROPPED and got[0] > 0


def test_departure_frees_slot_before_simultaneous_arrival():
    ch = ChannelModel(capacity=8.0, queue_limit=1, propagation_delay=0.0)
    assert run_channel([(0.0, 1), (1.0, 1)], ch) == [1.0, 2.0]


def test_presets():
    assert CHANNEL_PRESETS["lte"].capacity == 23.6e6
    assert CHANNEL_PRESETS["wave"].capacity == 27e6
    with pytest.raises(ValueError):
        channel_preset("5g")


def test_unconstrained_channel(synth_log):
    ch = ChannelModel(capacity=math.inf, queue_limit=None, propagation_delay=0.01)
    spec = SamplingSpec(0.2)
    report = simulate(synth_log.log, spec, 1.0, ch)
    assert report.dropped == 0
    assert all(abs(lat - 0.01) < 1e-9 for lat in report.latencies)
    assert all(0.01 - 1e-9 <= f <= 1.0 + 0.01 + 1e-9 for f in report.frame_latencies)
    kept = sampled_log(synth_log.log, spec)
    for kind in IndicatorKind:
        assert end_to_end_check(report, compute(kind, kept))


def test_batch_interval_check(synth_log):
    with pytest.raises(ValueError):
        simulate(synth_log.log, SamplingSpec(1.0), 0.5, CHANNEL_PRESETS["wave"])


def test_overload_drops_and_check_on_delivered(synth_log):
    ch = ChannelModel(capacity=1000.0, queue_limit=2)
    spec = SamplingSpec(0.05)
    report = simulate(synth_log.log, spec, 0.5, ch)
    assert report.dropped > 0
    kept = sampled_log(synth_log.log, spec)
    assert end_to_end_check(report, compute_sd(kept))
    assert report.generated == report.delivered + report.dropped + report.rejected + report.in_queue


def test_tamper_detected(synth_log):
    def flip(wire: bytes) -> bytes:
        b = bytearray(wire)
        b[24 + 8 + 7] ^= 0x01  # high byte of the first record's acceleration
        return bytes(b)

    spec = SamplingSpec(0.2)
    report = simulate(synth_log.log, spec, 1.0, CHANNEL_PRESETS["wave"], tamper=flip)
    assert report.dropped == 0
    assert not end_to_end_check(report, compute_sd(sampled_log(synth_log.log, spec)))


def test_latency_lower_bound_and_determinism(synth_log):
    ch = ChannelModel(capacity=50_000.0, queue_limit=50, propagation_delay=0.02)
    spec = SamplingSpec(0.1)
    a = simulate(synth_log.log, spec, 1.0, ch)
    b = simulate(synth_log.log, spec, 1.0, ch)
    assert a.to_record() == b.to_record() and a.latencies == b.latencies
    floor = message_size(1) * 8 / ch.capacity + ch.propagation_delay
    assert min(a.latencies) >= floor - 1e-12
    # first batch spans [t0, t0 + 1] inclusive: 11 frames
    assert max(a.frame_latencies) <= 1.0 + message_size(11) * 8 / ch.capacity + 0.02 + 1e-9


def test_throughput_matches_offered_load(synth_log):
    spec = SamplingSpec(0.2)
    batch = 1.0
    report = simulate(synth_log.log, spec, batch, CHANNEL_PRESETS["lte"])
    log = synth_log.log
    kept = kept_fraction(len(log), len(sampled_log(log, spec)))
    expected = offered_load(log.nominal_rate, kept) / 8
    per_batch = (batch / spec.interval) * 40 / report.duration
    assert abs(report.record_throughput - expected) <= per_batch


@pytest.mark.parametrize("seed", range(10))
def test_conservation_random(synth_log, seed):
    rnd = random.Random(seed)
    ch = ChannelModel(rnd.uniform(500, 20000), rnd.randint(1, 5), rnd.uniform(0, 0.5))
    k = rnd.choice([0.02, 0.1, 0.2])
    report = simulate(synth_log.log, SamplingSpec(k), rnd.choice([0.5, 1.0, 2.0]), ch, drain=rnd.random() < 0.5)
    assert report.generated == report.delivered + report.dropped + report.rejected + report.in_queue
