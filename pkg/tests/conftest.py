import numpy as np
import pytest

from cavmon.indicators import IndicatorKind, IndicatorSeries
from cavmon.synth import generate


def make_series(kind, timestamps, values, threshold=None):
    if threshold is None:
        threshold = kind.default_threshold
    return IndicatorSeries(kind, np.asarray(timestamps, float), np.asarray(values, float), threshold)


@pytest.fixture(scope="session")
def synth_log():
    """Two-minute synthetic log at 50 Hz with a few events of each kind."""
    from cavmon.synth import EventPlan

    plans = {
        IndicatorKind.SD: EventPlan(4, 2.1, -3.4),
        IndicatorKind.LPV: EventPlan(2, 19.99, 0.15),
        IndicatorKind.ITTC: EventPlan(4, 0.1, 2.995),
    }
    return generate(rate=50, duration=120, seed=7, plans=plans)


@pytest.fixture
def dip_series():
    """0..2 s at 0.1 s with an SD dip of -3.0, -3.5, -3.0 around t = 1.0."""
    ts = np.round(np.arange(21) * 0.1, 10)
    vs = np.zeros(21)
    vs[9:12] = [-3.0, -3.5, -3.0]
    return make_series(IndicatorKind.SD, ts, vs)
