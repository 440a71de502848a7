import math

import numpy as np
import pytest

from optophonon import (
    ModulationSignal,
    SystemParams,
    average_gamma,
    build_coefficients,
    build_rate_profile,
    gamma_at,
    omega_at,
    rates_double_sum,
)
from optophonon.rates import ExactRates, gamma_minimum


def test_trivial_table_rates(params, trivial_table):
    t = np.linspace(-3.0, 40.0, 17)
    assert np.allclose(gamma_at(params, trivial_table, t), 0.01, rtol=0, atol=1e-17)
    assert np.all(omega_at(params, trivial_table, t) == 0.0)
    shifted = SystemParams(delta_c=2.0)
    assert np.allclose(omega_at(shifted, trivial_table, t), -0.004, rtol=0, atol=1e-17)
    assert np.allclose(gamma_at(shifted, trivial_table, t), 0.002, rtol=0, atol=1e-17)
    assert average_gamma(params, trivial_table) == pytest.approx(0.01, abs=1e-17)


def test_factorized_matches_double_sum_at_origin(params, modulated_table):
    g_ref, o_ref = rates_double_sum(params, modulated_table, 0.0)
    assert gamma_at(params, modulated_table, 0.0) == pytest.approx(g_ref, rel=1e-10, abs=1e-300)
    assert omega_at(params, modulated_table, 0.0) == pytest.approx(o_ref, rel=1e-10)
    # frozen values of the reference set at t = 0
    assert g_ref == pytest.approx(-1.558e-3, rel=1e-3)


def test_factorized_matches_double_sum_random_cases(rng):
    worst = 0.0
    for _ in range(100):
        amps = tuple(rng.uniform(-4.0, 4.0, size=rng.integers(1, 3)))
        omega = rng.uniform(0.6, 2.5)
        table = build_coefficients(ModulationSignal(omega, amps), int(rng.integers(20, 40)))
        p = SystemParams(g=rng.uniform(0.01, 0.3), delta_c=rng.uniform(-3.0, 3.0))
        t = rng.uniform(-50.0, 50.0)
        g_ref, o_ref = rates_double_sum(p, table, t)
        scale = max(abs(g_ref), abs(o_ref))
        worst = max(worst,
                    abs(gamma_at(p, table, t) - g_ref) / scale,
                    abs(omega_at(p, table, t) - o_ref) / scale)
    assert worst <= 1e-10


def test_periodicity(params, modulated_table, rng):
    t = rng.uniform(0.0, 100.0, size=50)
    T = 2.0 * math.pi
    for f in (gamma_at, omega_at):
        assert np.max(np.abs(f(params, modulated_table, t + T) - f(params, modulated_table, t))) <= 1e-12


def test_average_gamma_is_period_mean(params, modulated_table):
    n = 8192
    t = np.arange(n) * (2.0 * math.pi / n)
    trapezoid = float(np.mean(gamma_at(params, modulated_table, t)))
    avg = average_gamma(params, modulated_table)
    assert abs(avg - trapezoid) <= 1e-8
    assert avg < 0.01
    assert avg == pytest.approx(1.0712e-3, rel=1e-4)


def test_gamma_dips_negative_for_reference_set(params, modulated_table):
    gmin = gamma_minimum(params, modulated_table)
    assert gmin < 0.0
    assert gmin == pytest.approx(-1.915e-3, rel=2e-3)


def test_profile_of_trivial_table(params, trivial_table):
    prof = build_rate_profile(params, trivial_table, 8)
    assert np.allclose(prof.gamma_values, 0.01, rtol=0, atol=1e-17)
    assert prof.period == 2.0 * math.pi


def test_profile_interpolation_error(params, modulated_table, modulated_profile, rng):
    t = rng.uniform(0.0, 200.0, size=2000)
    exact = gamma_at(params, modulated_table, t)
    assert np.max(np.abs(modulated_profile.gamma(t) - exact)) < 1e-8
    assert np.max(np.abs(modulated_profile.omega(t) - omega_at(params, modulated_table, t))) < 1e-8
    assert modulated_profile.period == 2.0 * math.pi
    on_grid = modulated_profile.times
    assert np.array_equal(modulated_profile.gamma(on_grid[:10]), modulated_profile.gamma_values[:10])


def test_profile_rejects_coarse_grid(params, modulated_table):
    with pytest.raises(ValueError, match="too coarse"):
        build_rate_profile(params, modulated_table, 64)


def test_exact_source_agrees_with_functions(params, modulated_table, modulated_exact):
    t = np.linspace(0.0, 9.0, 31)
    assert np.array_equal(modulated_exact.gamma(t), gamma_at(params, modulated_table, t))
    assert isinstance(modulated_exact.gamma(0.5), float)


@pytest.mark.parametrize("field,value", [
    ("g", -0.1), ("kappa", -1.0), ("nbar", -0.5), ("lam", -1.0),
    ("omega_ph", -2.0), ("kappa_c", 0.0), ("g", math.nan),
])
def test_params_validation(field, value):
    with pytest.raises(ValueError):
        SystemParams(**{field: value})


def test_bad_cavity_warning():
    with pytest.warns(UserWarning):
        SystemParams(g=0.5)
