import math

import numpy as np
import pytest
from scipy import integrate, special

from optophonon import bessel_j, bessel_j_row


def j_integral(m, x):
    """(1/pi) int_0^pi cos(m t - x sin t) dt."""
    val, _ = integrate.quad(lambda t: math.cos(m * t - x * math.sin(t)), 0.0, math.pi,
                            epsabs=1e-14, epsrel=1e-13, limit=400)
    return val / math.pi


def test_trivial_values():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(3, 0.0) == 0.0
    assert list(bessel_j_row(2, 0.0)) == [1.0, 0.0, 0.0]


def test_j0_of_ten_against_integral_representation():
    ref = j_integral(0, 10.0)
    assert abs(ref - (-0.2459357644513483)) < 1e-14
    assert abs(bessel_j(0, 10.0) - ref) < 1e-13


def test_row_element_matches_single_call_and_quadrature():
    row = bessel_j_row(5, 2.0)
    assert row[1] == bessel_j(1, 2.0)
    assert abs(row[1] - j_integral(1, 2.0)) < 1e-13


@pytest.mark.parametrize("x", [-200.0, -37.5, -3.0, 0.1, 1.0, 9.99, 10.0, 55.5, 150.0, 200.0])
def test_against_scipy_over_documented_range(x):
    row = bessel_j_row(500, x)
    ref = special.jv(np.arange(501), x)
    assert np.max(np.abs(row - ref)) <= 1e-12


def test_negative_orders_follow_reflection():
    for m in range(0, 101, 7):
        for x in (-50.0, -4.5, 0.3, 12.0, 50.0):
            assert bessel_j(-m, x) == (-1) ** m * bessel_j(m, x)


def test_row_agrees_with_single_calls():
    x = 17.25
    row = bessel_j_row(120, x)
    singles = np.array([bessel_j(m, x) for m in range(121)])
    scale = np.maximum(np.abs(singles), 1e-300)
    assert np.max(np.abs(row - singles) / scale) <= 1e-14


def test_neumann_normalization():
    row = bessel_j_row(60, 10.0)
    assert abs(row[0] + 2.0 * np.sum(row[2::2]) - 1.0) < 1e-12


@pytest.mark.parametrize("x", [0.5, 7.0, -23.0, 50.0])
def test_sum_of_squares(x):
    M = int(abs(x)) + 40
    row = bessel_j_row(M, x)
    assert abs(row[0] ** 2 + 2.0 * np.sum(row[1:] ** 2) - 1.0) < 1e-10


@pytest.mark.parametrize("x", [0.7, 5.0, -12.5, 80.0])
def test_three_term_recurrence(x):
    row = bessel_j_row(200, x)
    m = np.arange(1, 200)
    resid = row[m - 1] + row[m + 1] - (2.0 * m / x) * row[m]
    assert np.all(np.abs(resid) <= 1e-9 * np.maximum(1.0, np.abs(row[m])))


def test_deep_tail_is_exact_zero():
    row = bessel_j_row(400, 1.0)
    assert row[400] == 0.0
    assert np.all(row[np.abs(row) > 0] >= 1e-300)
    assert bessel_j(10**6, 3.0) == 0.0


@pytest.mark.parametrize("x", [3e-111, 1e-20, 9.9e-7, 1.01e-6])
def test_tiny_arguments(x):
    row = bessel_j_row(12, x)
    ref = special.jv(np.arange(13), x)
    assert np.all(np.isfinite(row))
    nz = ref != 0
    assert np.max(np.abs(row[nz] - ref[nz]) / np.abs(ref[nz])) < 1e-13
    assert row[1] == bessel_j(1, x)


@pytest.mark.parametrize("bad", [math.inf, -math.inf, math.nan])
def test_rejects_non_finite_argument(bad):
    with pytest.raises(ValueError):
        bessel_j(1, bad)
    with pytest.raises(ValueError):
        bessel_j_row(3, bad)


def test_rejects_bad_orders():
    with pytest.raises(ValueError):
        bessel_j_row(-1, 1.0)
    with pytest.raises(ValueError):
        bessel_j(10**6 + 1, 1.0)
