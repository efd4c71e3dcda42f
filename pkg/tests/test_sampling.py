import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavmon.indicators import IndicatorKind
from cavmon.sampling import SamplingSpec, UndersamplingWarning, decimate, kept_fraction, select_indices

from conftest import make_series


def _uniform(n, gap):
    return make_series(IndicatorKind.SD, np.arange(n) / round(1 / gap), np.linspace(-1, 1, n))


def test_twenty_hertz_every_tenth_point():
    series = _uniform(200, 0.05)
    out = decimate(series, SamplingSpec(0.5))
    assert np.array_equal(out.timestamps, series.timestamps[::10])


def test_identity_at_raw_gap():
    series = _uniform(101, 0.02)
    assert decimate(series, SamplingSpec(0.02)) == series


def test_phase_grid_walk():
    series = make_series(IndicatorKind.SD, np.round(np.arange(21) * 0.1, 10), np.zeros(21))
    out = decimate(series, SamplingSpec(0.2, 0.1))
    assert np.allclose(out.timestamps, np.arange(1, 20, 2) * 0.1)


def test_last_point_at_or_before_grid_time():
    series = make_series(IndicatorKind.SD, [0.0, 0.3, 0.45, 1.2], [1, 2, 3, 4])
    out = decimate(series, SamplingSpec(0.5))
    # grid 0, 0.5, 1.0 -> 0.0, 0.45, 0.45 (deduplicated)
    assert out.timestamps.tolist() == [0.0, 0.45]


def test_index_mode():
    series = _uniform(50, 0.02)
    out = decimate(series, SamplingSpec(0.1, 0.04, mode="index"))
    assert np.array_equal(out.timestamps, series.timestamps[2::5])


def test_undersampling_returns_input():
    series = _uniform(10, 0.05)
    with pytest.warns(UndersamplingWarning):
        out = decimate(series, SamplingSpec(0.01))
    assert out == series


def test_spec_validation():
    with pytest.raises(ValueError):
        SamplingSpec(0.0)
    with pytest.raises(ValueError):
        SamplingSpec(0.2, 0.2)
    with pytest.raises(ValueError):
        select_indices([], SamplingSpec(1.0))


@pytest.mark.parametrize("raw, kept, frac", [(1000, 100, 0.1), (7, 7, 1.0), (400, 3, 0.0075)])
def test_kept_fraction(raw, kept, frac):
    assert kept_fraction(raw, kept) == pytest.approx(frac)


def test_kept_fraction_zero_raw():
    with pytest.raises(ValueError):
        kept_fraction(0, 0)


@settings(max_examples=100, deadline=None)
@given(
    n=st.integers(2, 400),
    rate=st.sampled_from([10, 20, 50]),
    base=st.integers(1, 10),
    m=st.integers(1, 6),
    phase_frac=st.floats(0, 0.999),
)
def test_subset_nesting_and_monotone_count(n, rate, base, m, phase_frac):
    series = make_series(IndicatorKind.SD, np.arange(n) / rate, np.sin(np.arange(n)))
    k = base / rate
    phase = phase_frac * k
    fine = decimate(series, SamplingSpec(k, phase))
    coarse = decimate(series, SamplingSpec(m * k, phase))
    fine_set = set(fine.timestamps.tolist())
    assert set(coarse.timestamps.tolist()) <= fine_set
    assert fine_set <= set(series.timestamps.tolist())
    assert len(coarse) <= len(fine)
    lookup = dict(zip(series.timestamps.tolist(), series.values.tolist()))
    assert all(lookup[t] == v for t, v in zip(fine.timestamps.tolist(), fine.values.tolist()))
    assert decimate(series, SamplingSpec(k, phase)) == fine
