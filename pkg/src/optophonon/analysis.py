"""Summary metrics over simulated time series.

Window lengths use linear interpolation between output samples, so they do
not snap to the output grid.
"""
from __future__ import annotations

import math

import numpy as np

from .modulation import CoefficientTable
from .rates import SystemParams, average_gamma, gamma_minimum


def _crossing(t0, t1, v0, v1, level):
    if v1 == v0:
        return t0
    return t0 + (level - v0) * (t1 - t0) / (v1 - v0)


def time_above(times, values, level) -> float:
    """Total time with ``values > level``; NaN samples count as not above."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    total = 0.0
    for k in range(len(t) - 1):
        a, b = v[k], v[k + 1]
        if math.isnan(a) or math.isnan(b):
            continue
        up_a, up_b = a > level, b > level
        if up_a and up_b:
            total += t[k + 1] - t[k]
        elif up_a:
            total += _crossing(t[k], t[k + 1], a, b, level) - t[k]
        elif up_b:
            total += t[k + 1] - _crossing(t[k], t[k + 1], a, b, level)
    return float(total)


def time_below(times, values, level) -> float:
    """Total time with ``values < level``; NaN samples count as not below."""
    v = np.asarray(values, dtype=float)
    return time_above(times, -v, -level)


def last_time_above(times, values, level) -> float:
    """Time of the last downward crossing of ``level``.

    NaN when the series is still above ``level`` at the final sample, 0 when
    it never rises above it.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    above = v > level
    if above[-1]:
        return math.nan
    idx = np.flatnonzero(above)
    if idx.size == 0:
        return 0.0
    k = int(idx[-1])
    return float(_crossing(t[k], t[k + 1], v[k], v[k + 1], level))


def effective_lifetime(times, nb, nbar: float, kappa: float) -> float:
    """Last crossing of nb below nbar + (max nb - nbar) / e.

    Without any excess over the thermal level the metric degenerates; it
    then reports the thermal 1/e relaxation time 1 / (2 kappa) of <b+b>.
    NaN if the excess has not decayed by the end of the series.
    """
    nb = np.asarray(nb, dtype=float)
    excess = float(np.nanmax(nb)) - nbar
    if excess <= 1e-12 * max(1.0, nbar):
        return 1.0 / (2.0 * kappa) if kappa > 0 else math.inf
    return last_time_above(times, nb, nbar + excess / math.e)


def summarize(series, params: SystemParams, table: CoefficientTable) -> dict:
    """Run summary: average and minimum gamma, peak nb, lifetime, final g2."""
    g2 = series.g2
    return {
        "average_gamma": average_gamma(params, table),
        "min_gamma": gamma_minimum(params, table),
        "peak_nb": float(np.max(series.nb)),
        "lifetime": effective_lifetime(series.times, series.nb, params.nbar, params.kappa),
        "final_g2": float(g2[-1]),
    }
