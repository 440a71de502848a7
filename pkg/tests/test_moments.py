import math

import numpy as np
import pytest

from optophonon import (
    IntegrationError,
    ModulationSignal,
    MomentState,
    SystemParams,
    TimeSeries,
    build_coefficients,
    build_rate_profile,
    derive_g2,
    rhs_moments,
    simulate_moments,
)
from optophonon.moments import STATE_FIELDS, output_grid
from optophonon.oracle import quadrature_population
from optophonon.rates import ExactRates

from conftest import ConstantRates


def conjugate_pair_rhs(v, gam, p):
    """Complex moments with each conjugate carried as its own variable.

    v = [S_ee, S_ee b, S_ee b+, b+b, S_ee b+b, S_ee b^2, S_ee b+^2,
         S_ee b+ b^2, S_ee b+^2 b, b+^2 b^2]
    Derived from the adjoint Lindblad equation term by term, independent of
    the packed real form.
    """
    s, z1, z1c, n, w, z2, z2c, z3, z3c, B = v
    lam, om, k, nb = p.lam, p.omega_ph, p.kappa, p.nbar
    il = 1j * lam
    return np.array([
        -2 * gam * s,
        -(2 * gam + 1j * om + k) * z1 - il * s,
        -(2 * gam - 1j * om + k) * z1c + il * s,
        il * (z1 - z1c) - 2 * k * n + 2 * k * nb,
        -(2 * gam + 2 * k) * w + il * (z1 - z1c) + 2 * k * nb * s,
        -(2 * gam + 2j * om + 2 * k) * z2 - 2 * il * z1,
        -(2 * gam - 2j * om + 2 * k) * z2c + 2 * il * z1c,
        -(2 * gam + 1j * om + 3 * k) * z3 + il * (z2 - 2 * w) + 4 * k * nb * z1,
        -(2 * gam - 1j * om + 3 * k) * z3c + il * (2 * w - z2c) + 4 * k * nb * z1c,
        2 * il * (z3 - z3c) - 4 * k * B + 8 * k * nb * n,
    ])


def pack(v):
    s, z1, _, n, w, z2, _, z3, _, B = v
    return np.array([s.real, z1.real, z1.imag, n.real, w.real, z2.real, z2.imag,
                     z3.real, z3.imag, B.real])


def unpack(y):
    s, a, b, n, w, c, d, e, f, B = y
    return np.array([s, a + 1j * b, a - 1j * b, n, w, c + 1j * d, c - 1j * d,
                     e + 1j * f, e - 1j * f, B], dtype=complex)


def rk4(f, y, t0, t1, steps):
    h = (t1 - t0) / steps
    t = t0
    for _ in range(steps):
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def test_rhs_at_initial_state(params, modulated_exact):
    d = rhs_moments(MomentState.reference(1.0), 0.0, params, modulated_exact)
    g0 = modulated_exact.gamma(0.0)
    assert d[0] == pytest.approx(-2.0 * g0, rel=1e-15)
    assert d[1] == 0.0
    assert d[2] == -params.lam
    assert d[3] == 0.0


def test_rhs_thermal_fixed_point():
    p = SystemParams(lam=0.0, nbar=1.7)
    d = rhs_moments(MomentState.reference(1.7, s_ee=0.0), 3.0, p, ConstantRates(0.0))
    assert np.all(np.abs(d) < 1e-15)


def test_rhs_matches_conjugate_pair_form(params, rng):
    for _ in range(20):
        y = rng.normal(size=10)
        gam = rng.uniform(-0.01, 0.05)
        d = rhs_moments(y, 0.0, params, ConstantRates(gam))
        ref = conjugate_pair_rhs(unpack(y), gam, params)
        assert np.max(np.abs(d - pack(ref))) < 1e-12
        # the carried conjugates stay conjugate
        assert abs(ref[2] - np.conj(ref[1])) < 1e-12


def test_conjugate_pair_integration_agrees(params, modulated_exact):
    y0 = MomentState.reference(1.0).to_array()

    def packed(t, y):
        return rhs_moments(y, t, params, modulated_exact)

    def explicit(t, v):
        return conjugate_pair_rhs(v, modulated_exact.gamma(t), params)

    a = rk4(packed, y0, 0.0, 10.0, 2000)
    b = rk4(explicit, unpack(y0), 0.0, 10.0, 2000)
    assert np.max(np.abs(a - pack(b))) <= 1e-12
    assert np.max(np.abs(b[[0, 3, 4, 9]].imag)) <= 1e-12


def test_analytic_decay(trivial_table):
    p = SystemParams(g=0.1, delta_c=0.0, lam=0.0)
    src = build_rate_profile(p, trivial_table, 64)
    s = simulate_moments(p, MomentState.reference(p.nbar), src, 200.0, 0.05, 1e-9)
    assert np.max(np.abs(s.s_ee - np.exp(-0.02 * s.times))) <= 1e-6


@pytest.mark.parametrize("exact", [False, True])
def test_population_matches_quadrature(params, modulated_table, modulated_profile, exact):
    src = ExactRates(params, modulated_table) if exact else modulated_profile
    s = simulate_moments(params, MomentState.reference(1.0), src, 100.0, 0.5, 1e-9)
    ref = quadrature_population(ExactRates(params, modulated_table), s.times)
    assert np.max(np.abs(s.s_ee - ref)) <= 1e-6


def test_modulation_slows_population_decay(params, trivial_profile, modulated_profile):
    ics = MomentState.reference(1.0)
    plain = simulate_moments(params, ics, trivial_profile, 100.0, 0.5)
    mod = simulate_moments(params, ics, modulated_profile, 100.0, 0.5)
    factor = mod.s_ee[-1] / plain.s_ee[-1]
    assert factor > 2.0
    # quadrature of gamma for the reference set
    assert factor == pytest.approx(5.960031761385519, rel=1e-6)


def test_population_bounds_with_nonnegative_gamma(params, trivial_profile):
    s = simulate_moments(params, MomentState.reference(1.0), trivial_profile, 300.0, 0.5)
    assert np.all(s.s_ee >= 0.0)
    assert np.all(s.s_ee <= 1.0)
    assert np.all(np.diff(s.s_ee) < 0.0)


def test_thermal_fixed_point_is_held(trivial_table):
    p = SystemParams(lam=0.0)
    src = build_rate_profile(p, trivial_table, 64)
    s = simulate_moments(p, MomentState.reference(1.0), src, 100.0, 0.05)
    assert np.max(np.abs(s.nb - 1.0)) <= 1e-9
    assert np.max(np.abs(s.g2 - 2.0)) <= 1e-8


@pytest.mark.parametrize("amps,t_end,t_cross,rate", [
    ((), 1200.0, 691.0, 0.02),
    ((10.0,), 9000.0, 6448.5, 2.1424455270751853e-3),
])
def test_long_time_limits(params, amps, t_end, t_cross, rate):
    table = build_coefficients(ModulationSignal(1.0, amps), 150)
    src = build_rate_profile(params, table, 4096)
    s = simulate_moments(params, MomentState.reference(1.0), src, t_end, 0.5, 1e-10)
    k = int(np.argmax(s.s_ee < 1e-6))
    assert s.times[k] == pytest.approx(t_cross, abs=0.5)
    assert abs(s.nb[k] - 1.0) < 1e-3
    assert abs(s.g2[k] - 2.0) < 1e-3
    # the excess over the thermal values follows the population, whose
    # period-averaged decay rate is 2 * average gamma
    i0 = int(np.searchsorted(s.times, 0.5 * s.times[k]))
    span = s.times[k] - s.times[i0]
    for v in (s.s_ee, s.nb - 1.0, s.g2 - 2.0):
        measured = math.log(v[i0] / v[k]) / span
        assert measured == pytest.approx(rate, rel=1e-2)


def test_output_grid_and_metadata(params, trivial_profile):
    s = simulate_moments(params, MomentState.reference(1.0), trivial_profile, 1.0, 0.3)
    assert np.allclose(s.times, [0.0, 0.3, 0.6, 0.9, 1.0])
    assert s.extra["steps"] > 0
    assert len(s) == 5
    assert np.array_equal(s.states[0], MomentState.reference(1.0).to_array())
    assert s.gamma.shape == s.times.shape
    assert np.array_equal(output_grid(1.0, 0.25), [0.0, 0.25, 0.5, 0.75, 1.0])


def test_g2_rules():
    rows = np.zeros((3, 10))
    nb, b2b2 = STATE_FIELDS.index("nb"), STATE_FIELDS.index("b2b2")
    rows[0, nb], rows[0, b2b2] = 1.3, 2 * 1.3**2
    rows[1, nb], rows[1, b2b2] = 4.0, 16.0
    rows[2, nb], rows[2, b2b2] = 1e-13, 1.0
    g2 = derive_g2(TimeSeries(np.arange(3.0), rows, np.zeros(3)))
    assert g2[0] == pytest.approx(2.0, rel=1e-15)
    assert g2[1] == 1.0
    assert math.isnan(g2[2])


def test_initial_g2_is_thermal(params, modulated_profile):
    s = simulate_moments(params, MomentState.reference(1.0), modulated_profile, 1.0, 0.5)
    assert s.g2[0] == 2.0


def test_integration_failure_carries_last_time(params, modulated_profile):
    with pytest.raises(IntegrationError) as info:
        simulate_moments(params, MomentState.reference(1.0), modulated_profile, 50.0, 1.0,
                         max_steps=40)
    err = info.value
    assert 0.0 < err.t_last < 50.0
    assert err.series is not None and len(err.series) >= 1
    assert np.all(np.diff(err.series.times) > 0)


@pytest.mark.parametrize("tol", [1e-13, 1e-3])
def test_tolerance_range(params, modulated_profile, tol):
    with pytest.raises(ValueError):
        simulate_moments(params, MomentState.reference(1.0), modulated_profile, 1.0, 0.1, tol)


def test_state_shape_is_checked(params, modulated_profile):
    with pytest.raises(ValueError):
        rhs_moments(np.zeros(7), 0.0, params, modulated_profile)
