import math

import numpy as np
import pytest

from optophonon import effective_lifetime, time_above, time_below
from optophonon.analysis import last_time_above


def test_windows_interpolate_crossings():
    t = np.array([0.0, 1.0, 2.0, 3.0])
    v = np.array([0.0, 2.0, 2.0, 0.0])
    assert time_above(t, v, 1.0) == pytest.approx(2.0)
    assert time_below(t, v, 1.0) == pytest.approx(1.0)
    assert time_above(t, v, 5.0) == 0.0


def test_windows_skip_nan():
    t = np.arange(4.0)
    v = np.array([2.0, np.nan, 2.0, 2.0])
    assert time_above(t, v, 1.0) == 1.0


def test_last_crossing():
    t = np.linspace(0.0, 10.0, 101)
    v = np.exp(-t)
    assert last_time_above(t, v, math.exp(-2.5)) == pytest.approx(2.5, abs=2e-3)
    assert last_time_above(t, v, 5.0) == 0.0
    assert math.isnan(last_time_above(t, v + 1.0, 0.5))


def test_lifetime_of_exponential_excess():
    t = np.linspace(0.0, 20.0, 2001)
    nb = 1.0 + 3.0 * np.exp(-0.5 * t)
    assert effective_lifetime(t, nb, 1.0, 1.0) == pytest.approx(2.0, abs=1e-3)


def test_lifetime_without_excess_is_thermal_scale():
    t = np.linspace(0.0, 5.0, 11)
    assert effective_lifetime(t, np.full(11, 1.0), 1.0, 2.0) == 0.25


def test_lifetime_not_decayed():
    t = np.linspace(0.0, 5.0, 11)
    assert math.isnan(effective_lifetime(t, 1.0 + t, 1.0, 1.0))
