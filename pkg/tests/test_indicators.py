import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavmon.errors import NoDataError
from cavmon.indicators import (
    IndicatorKind,
    compute_ittc,
    compute_lpv,
    compute_sd,
    inverse_ttc,
    lane_margin,
)
from cavmon.telemetry import TelemetryFrame, TelemetryLog


def _log(frames, width=2.0):
    return TelemetryLog(tuple(frames), vehicle_width=width)


class TestSevereDeceleration:
    def test_critical_point(self):
        series = compute_sd(_log([TelemetryFrame(1.0, long_accel=-3.0)]))
        assert series.threshold == -2.94
        assert list(series.timestamps) == [1.0] and list(series.values) == [-3.0]
        assert series.critical.tolist() == [True]

    def test_zero_not_critical(self):
        assert compute_sd(_log([TelemetryFrame(0.0, long_accel=0.0)])).critical.tolist() == [False]

    def test_threshold_is_inclusive(self):
        assert compute_sd(_log([TelemetryFrame(0.0, long_accel=-2.94)])).critical.tolist() == [True]

    def test_skips_frames_without_chassis(self):
        frames = [
            TelemetryFrame(0.0, long_accel=-1.0),
            TelemetryFrame(0.1, target_range=3.0, target_range_rate=0.0),
            TelemetryFrame(0.2, long_accel=-2.0),
        ]
        series = compute_sd(_log(frames))
        assert series.timestamps.tolist() == [0.0, 0.2] and series.skipped == 1

    def test_no_chassis_raises(self):
        with pytest.raises(NoDataError):
            compute_sd(_log([TelemetryFrame(0.0, target_range=3.0, target_range_rate=0.0)]))

    def test_identity_with_raw_column(self, synth_log):
        series = compute_sd(synth_log.log)
        raw = [f.long_accel for f in synth_log.log.frames]
        assert series.values.tolist() == raw
        assert series.timestamps.tolist() == [f.timestamp for f in synth_log.log.frames]


class TestLateralPositionVariation:
    def test_centered(self):
        frame = TelemetryFrame(0.0, left_lane_position=1.7, right_lane_position=1.7)
        assert compute_lpv(_log([frame])).values[0] == pytest.approx(0.7, abs=1e-12)

    def test_offset(self):
        frame = TelemetryFrame(0.0, left_lane_position=2.2, right_lane_position=1.2)
        assert compute_lpv(_log([frame])).values[0] == pytest.approx(0.2, abs=1e-12)

    def test_worked_lane_example_follows_formula(self):
        # 3.2 m lane, 2 m car, 0.5 m right of center: margins 1.1 and 0.1
        assert float(lane_margin(1.6 + 0.5, 1.6 - 0.5, 2.0)) == pytest.approx(0.1, abs=1e-12)

    def test_needs_both_lanes(self):
        frames = [
            TelemetryFrame(0.0, left_lane_position=1.7),
            TelemetryFrame(0.1, left_lane_position=1.7, right_lane_position=1.5),
        ]
        series = compute_lpv(_log(frames))
        assert series.timestamps.tolist() == [0.1] and series.skipped == 1

    def test_bad_width(self):
        frame = TelemetryFrame(0.0, left_lane_position=1.7, right_lane_position=1.7)
        with pytest.raises(ValueError):
            compute_lpv(_log([frame]), vehicle_width=0.0)

    def test_no_lanes(self):
        with pytest.raises(NoDataError):
            compute_lpv(_log([TelemetryFrame(0.0, long_accel=0.0)]))

    @settings(max_examples=200)
    @given(
        st.floats(0, 5, allow_nan=False),
        st.floats(0, 5, allow_nan=False),
        st.floats(0.1, 3, allow_nan=False),
    )
    def test_swap_invariant_and_non_negative(self, left, right, width):
        a = float(lane_margin(left, right, width))
        assert a >= 0
        assert a == float(lane_margin(right, left, width))


class TestInverseTimeToCollision:
    def test_closing(self):
        frame = TelemetryFrame(0.0, target_range=5.0, target_range_rate=-10.0)
        series = compute_ittc(_log([frame]))
        assert series.values[0] == pytest.approx(2.0)
        assert series.critical.tolist() == [True]

    def test_equal_speed(self):
        frame = TelemetryFrame(0.0, target_range=30.0, target_range_rate=0.0)
        assert compute_ittc(_log([frame])).values[0] == 0.0

    def test_opening(self):
        frame = TelemetryFrame(0.0, target_range=10.0, target_range_rate=5.0)
        series = compute_ittc(_log([frame]))
        assert series.values[0] == pytest.approx(-0.5)
        assert series.critical.tolist() == [False]

    def test_sign_flag(self):
        frame = TelemetryFrame(0.0, target_range=10.0, target_range_rate=5.0)
        assert compute_ittc(_log([frame]), closing_negative=False).values[0] == pytest.approx(0.5)

    def test_zero_range_skipped(self):
        frames = [
            TelemetryFrame(0.0, target_range=0.0, target_range_rate=-1.0),
            TelemetryFrame(0.1, long_accel=0.0),
            TelemetryFrame(0.2, target_range=4.0, target_range_rate=-1.0),
        ]
        series = compute_ittc(_log(frames))
        assert series.timestamps.tolist() == [0.2] and series.skipped == 2

    @settings(max_examples=200)
    @given(
        st.floats(0.1, 200, allow_nan=False),
        st.floats(-50, 50, allow_nan=False),
        st.floats(0.01, 100, allow_nan=False),
    )
    def test_scale_invariant(self, rng, rate, c):
        base = float(inverse_ttc(rng, rate))
        assert math.isclose(float(inverse_ttc(c * rng, c * rate)), base, rel_tol=1e-12, abs_tol=1e-12)


def test_orientation():
    assert IndicatorKind.SD.lower_is_critical and IndicatorKind.LPV.lower_is_critical
    assert not IndicatorKind.ITTC.lower_is_critical
    assert IndicatorKind.ITTC.is_critical([1.76, 1.7], 1.76).tolist() == [True, False]


def test_series_write_csv(tmp_path):
    series = compute_sd(_log([TelemetryFrame(0.0, long_accel=-3.0), TelemetryFrame(0.1, long_accel=0.5)]))
    path = tmp_path / "sd.csv"
    series.write_csv(path)
    assert path.read_text().splitlines() == ["timestamp,value,critical", "0.0,-3.0,1", "0.1,0.5,0"]


def test_series_rejects_unsorted():
    from cavmon.indicators import IndicatorSeries

    with pytest.raises(ValueError):
        IndicatorSeries(IndicatorKind.SD, np.array([1.0, 0.5]), np.array([0.0, 0.0]), -2.94)
