"""Integer-order Bessel functions of the first kind for real arguments.

The whole row J_0..J_n is produced by Miller's downward recurrence,
normalized with the Neumann sum J_0 + 2 sum_k J_2k = 1. The recurrence is
started far enough above both the requested order and |x| that the
truncation error sits below double precision, so every order, inside or
outside the oscillatory region, comes out of the same stable sweep.

Values whose magnitude falls below ``UNDERFLOW`` are returned as exact zeros.
"""
from __future__ import annotations

import math

import numpy as np

UNDERFLOW = 1e-300
MAX_ORDER = 10**6

_RESCALE_ABOVE = 1e250
_RESCALE_BY = 1e-250
# Below this the two-term power series is exact to double precision, and the
# downward recurrence would grow by more than the rescaling margin per step.
_SERIES_BELOW = 1e-6


def _check_argument(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"Bessel argument must be finite, got {x!r}")
    return x


def _start_order(n: int, ax: float) -> int:
    top = max(n, int(math.ceil(ax)))
    start = top + 20 + int(math.sqrt(160.0 * (top + 1)))
    return start + (start % 2)


def _underflows(m: int, ax: float) -> bool:
    # |J_m(x)| <= (x/2)^m / m!
    if m == 0 or ax == 0.0:
        return m != 0
    log_bound = m * math.log(ax / 2.0) - math.lgamma(m + 1.0)
    return log_bound < math.log(UNDERFLOW)


def _last_significant_order(ax: float) -> int:
    """Smallest order above which the (x/2)^m/m! bound guarantees underflow."""
    lo = int(math.ceil(ax))
    if _underflows(lo, ax):
        return lo
    hi = 2 * lo + 64
    while not _underflows(hi, ax):
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _underflows(mid, ax):
            hi = mid
        else:
            lo = mid
    return hi


def _series_row(n: int, ax: float) -> np.ndarray:
    """J_0..J_n at small ax from (x/2)^m / m! * (1 - (x/2)^2 / (m + 1))."""
    half = 0.5 * ax
    row = np.zeros(n + 1)
    lead = 1.0
    for m in range(n + 1):
        if m > 0:
            lead *= half / m
        if lead < UNDERFLOW:
            break
        row[m] = lead * (1.0 - half * half / (m + 1))
    return row


def _miller_row(n: int, ax: float) -> np.ndarray:
    """J_0..J_n at ax > 0 (nonnegative orders, nonnegative argument).

    The starting order depends on ``ax`` only, so rows of different length
    share every arithmetic operation and agree bit for bit.
    """
    if ax < _SERIES_BELOW:
        return _series_row(n, ax)
    start = _start_order(_last_significant_order(ax), ax)
    row = np.zeros(n + 1)
    two_over_x = 2.0 / ax
    j_next = 0.0
    j_cur = 1.0
    norm = 0.0
    for k in range(start, 0, -1):
        if k <= n:
            row[k] = j_cur
        if k % 2 == 0:
            norm += 2.0 * j_cur
        j_prev = k * two_over_x * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        if abs(j_cur) > _RESCALE_ABOVE:
            j_cur *= _RESCALE_BY
            j_next *= _RESCALE_BY
            norm *= _RESCALE_BY
            row *= _RESCALE_BY
    row[0] = j_cur
    norm += j_cur
    row /= norm
    row[np.abs(row) < UNDERFLOW] = 0.0
    return row


def bessel_j_row(max_order: int, x: float) -> np.ndarray:
    """Return ``[J_0(x), J_1(x), ..., J_max_order(x)]``.

    Cost is linear in ``max(max_order, |x|)``.
    """
    x = _check_argument(x)
    max_order = int(max_order)
    if max_order < 0:
        raise ValueError(f"max_order must be >= 0, got {max_order}")
    if max_order > MAX_ORDER:
        raise ValueError(f"max_order must be <= {MAX_ORDER}, got {max_order}")
    if x == 0.0:
        row = np.zeros(max_order + 1)
        row[0] = 1.0
        return row
    ax = abs(x)
    n_eff = min(max_order, _last_significant_order(ax))
    row = np.zeros(max_order + 1)
    row[: n_eff + 1] = _miller_row(n_eff, ax)
    if x < 0.0:
        row[1::2] = -row[1::2]
    return row


def bessel_j(m: int, x: float) -> float:
    """J_m(x) for integer ``m`` and finite real ``x``.

    Negative orders use J_{-m}(x) = (-1)^m J_m(x), applied after the
    positive-order value is computed so the identity holds bit for bit.
    """
    x = _check_argument(x)
    m = int(m)
    if abs(m) > MAX_ORDER:
        raise ValueError(f"|m| must be <= {MAX_ORDER}, got {m}")
    am = abs(m)
    if x == 0.0:
        value = 1.0 if am == 0 else 0.0
    elif _underflows(am, abs(x)):
        value = 0.0
    else:
        value = float(_miller_row(am, abs(x))[am])
        if x < 0.0 and am % 2 == 1:
            value = -value
    if m < 0 and am % 2 == 1:
        value = -value
    return value
