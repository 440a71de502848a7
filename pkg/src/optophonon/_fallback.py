"""Pure Python/numpy implementation of the hot kernels.

Same call signatures as the compiled ``_kernels`` module; used when the
extension is not built or ``OPTOPHONON_PURE_PYTHON=1`` is set.
"""
import math

import numpy as np
from scipy.integrate import DOP853 as _DOP853

MODE_PROFILE = 0
MODE_EXACT = 1

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_MAX_STEPS = 2

# Dormand-Prince 5(4)
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1 = 71 / 57600
_E3 = -71 / 16695
_E4 = 71 / 1920
_E5 = -17253 / 339200
_E6 = 22 / 525
_E7 = -1 / 40
# dense output (Hairer & Wanner, contd5)
_D1 = -12715105075 / 11282082432
_D3 = 87487479700 / 32700410799
_D4 = -10690763975 / 1880347072
_D5 = 701980252875 / 199316789632
_D6 = -1453857185 / 822651844
_D7 = 69997945 / 29380423


def rates_factorized(m, cw_gamma, cw_omega, c, omega, times):
    """gamma, dgamma/dt, Omega, dOmega/dt at each time.

    gamma(t) = Re[F(t) conj(G(t))] with F = sum_m cw_gamma[m] e^{i m w t},
    G = sum_n c[n] e^{i n w t}; Omega likewise with ``cw_omega``.
    """
    times = np.ascontiguousarray(times, dtype=float)
    phase = np.exp(1j * omega * np.multiply.outer(times, m))
    dphase = phase * (1j * omega * m)
    g = phase @ c
    dg = dphase @ c
    out = []
    for cw in (cw_gamma, cw_omega):
        f = phase @ cw
        df = dphase @ cw
        out.append(np.real(f * np.conj(g)))
        out.append(np.real(df * np.conj(g) + f * np.conj(dg)))
    return out[0], out[1], out[2], out[3]


def hermite_periodic(values, derivs, period, times):
    """Periodic cubic Hermite interpolation on a uniform grid over one period."""
    n = len(values)
    h = period / n
    tau = np.mod(np.asarray(times, dtype=float), period) / h
    k = np.minimum(np.floor(tau).astype(np.int64), n - 1)
    s = tau - k
    k1 = (k + 1) % n
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * values[k] + h10 * h * derivs[k] + h01 * values[k1] + h11 * h * derivs[k1]


def _gamma_source(mode, a, b, c, p):
    if mode == MODE_PROFILE:
        vals = np.asarray(a, dtype=float)
        ders = np.asarray(b, dtype=float)
        n = len(vals)
        h = p / n

        def gamma(t):
            tau = math.fmod(t, p)
            if tau < 0.0:
                tau += p
            tau /= h
            k = int(tau)
            if k >= n:
                k = n - 1
            s = tau - k
            k1 = k + 1 if k + 1 < n else 0
            s2 = s * s
            s3 = s2 * s
            return ((2 * s3 - 3 * s2 + 1) * vals[k] + (s3 - 2 * s2 + s) * h * ders[k]
                    + (3 * s2 - 2 * s3) * vals[k1] + (s3 - s2) * h * ders[k1])

        return gamma

    if mode == MODE_EXACT:
        m = np.asarray(a, dtype=float)
        cw = np.asarray(b, dtype=float)
        cc = np.asarray(c, dtype=float)

        def gamma(t):
            ph = np.exp(1j * p * t * m)
            return float(np.real(np.dot(ph, cw) * np.conj(np.dot(ph, cc))))

        return gamma

    raise ValueError(f"unknown rate mode {mode}")


def moment_rhs(y, gam, lam, omega_ph, kappa, nbar):
    """Derivative of the 10 real moment components (see moments.STATE_FIELDS)."""
    s_ee, z1r, z1i, nb, sn, z2r, z2i, z3r, z3i, bb = y
    out = np.empty(10)
    out[0] = -2.0 * gam * s_ee
    # <S_ee b>' = -(2g + i w + k) z1 - i lam s
    d1 = 2.0 * gam + kappa
    out[1] = -d1 * z1r + omega_ph * z1i
    out[2] = -d1 * z1i - omega_ph * z1r - lam * s_ee
    out[3] = -2.0 * lam * z1i - 2.0 * kappa * nb + 2.0 * kappa * nbar
    out[4] = -2.0 * (gam + kappa) * sn + 2.0 * kappa * nbar * s_ee - 2.0 * lam * z1i
    # <S_ee b^2>' = -2(g + i w + k) z2 - 2 i lam z1
    d2 = 2.0 * (gam + kappa)
    out[5] = -d2 * z2r + 2.0 * omega_ph * z2i + 2.0 * lam * z1i
    out[6] = -d2 * z2i - 2.0 * omega_ph * z2r - 2.0 * lam * z1r
    # <S_ee b+ b^2>' = -(2g + i w + 3k) z3 + i lam (z2 - 2 sn) + 4 k nbar z1
    d3 = 2.0 * gam + 3.0 * kappa
    out[7] = -d3 * z3r + omega_ph * z3i - lam * z2i + 4.0 * kappa * nbar * z1r
    out[8] = -d3 * z3i - omega_ph * z3r + lam * (z2r - 2.0 * sn) + 4.0 * kappa * nbar * z1i
    out[9] = -4.0 * lam * z3i - 4.0 * kappa * bb + 8.0 * kappa * nbar * nb
    return out


def dopri5(f, y0, t_out, tol, max_steps, h0=1e-3):
    """Adaptive Dormand-Prince 5(4) with dense output at ``t_out``.

    ``t_out`` must be increasing and start at the initial time. Returns
    ``(Y, status, t_last, n_accepted, n_rejected)``; on failure the rows past
    the last good time are NaN.
    """
    t_out = np.asarray(t_out, dtype=float)
    y = np.array(y0, dtype=float)
    n_out = len(t_out)
    Y = np.full((n_out, len(y)), np.nan)
    t = float(t_out[0])
    Y[0] = y
    i_out = 1
    t_end = float(t_out[-1])
    h = min(h0, t_end - t) if t_end > t else h0
    k1 = f(t, y)
    n_acc = n_rej = 0
    status = STATUS_OK
    while i_out < n_out:
        if n_acc + n_rej >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if h < 16.0 * 2.220446049250313e-16 * max(1.0, abs(t)):
            status = STATUS_STEP_UNDERFLOW
            break
        k2 = f(t + _C2 * h, y + h * (_A21 * k1))
        k3 = f(t + _C3 * h, y + h * (_A31 * k1 + _A32 * k2))
        k4 = f(t + _C4 * h, y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3))
        k5 = f(t + _C5 * h, y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4))
        k6 = f(t + h, y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5))
        y_new = y + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
        k7 = f(t + h, y_new)
        err_vec = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
        scale = tol + tol * np.maximum(np.abs(y), np.abs(y_new))
        err = math.sqrt(float(np.mean((err_vec / scale) ** 2)))
        if err <= 1.0:
            t_new = t + h
            if i_out < n_out and t_out[i_out] <= t_new:
                r2 = y_new - y
                r3 = h * k1 - r2
                r4 = r2 - h * k7 - r3
                r5 = h * (_D1 * k1 + _D3 * k3 + _D4 * k4 + _D5 * k5 + _D6 * k6 + _D7 * k7)
                while i_out < n_out and t_out[i_out] <= t_new:
                    th = (t_out[i_out] - t) / h
                    th1 = 1.0 - th
                    Y[i_out] = y + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)))
                    i_out += 1
            t = t_new
            y = y_new
            k1 = k7
            n_acc += 1
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err**-0.2))
        else:
            n_rej += 1
            fac = max(0.2, 0.9 * err**-0.2)
            fac = min(fac, 1.0)
        h *= fac
    return Y, status, t, n_acc, n_rej


def integrate_moments(y0, t_out, lam, omega_ph, kappa, nbar, mode, a, b, c, p, tol, max_steps):
    gamma = _gamma_source(mode, a, b, c, p)

    def f(t, y):
        return moment_rhs(y, gamma(t), lam, omega_ph, kappa, nbar)

    return dopri5(f, y0, t_out, tol, max_steps)


def lindblad_ladder(blocks, gam, om, lam, omega_ph, r_down, r_up):
    """Effective emitter-phonon Lindblad generator on emitter blocks.

    ``blocks`` has shape (4, n, n) ordered gg, ge, eg, ee, or (2, n, n)
    holding gg, ee only (valid while the emitter coherences vanish).
    """
    nblk, n = blocks.shape[0], blocks.shape[-1]
    if nblk not in (2, 4):
        raise ValueError(f"expected 2 or 4 emitter blocks, got {nblk}")
    k = np.arange(n, dtype=float)
    sq = np.sqrt(k[1:])
    sq_outer = np.outer(sq, sq)
    bbd = k + 1.0
    bbd[-1] = 0.0  # b b+ truncated at the top level
    loss = r_down * k + r_up * bbd
    out = (-1j * omega_ph * (k[:, None] - k[None, :]) - (loss[:, None] + loss[None, :])) * blocks

    # 2 r_down b rho b+ + 2 r_up b+ rho b
    out[:, :-1, :-1] += 2.0 * r_down * sq_outer * blocks[:, 1:, 1:]
    out[:, 1:, 1:] += 2.0 * r_up * sq_outer * blocks[:, :-1, :-1]

    # -i lam [S_ee (b + b+), rho]: acts from the left on e-rows, right on e-columns
    ee = nblk - 1
    left_rows = [ee] if nblk == 2 else [2, 3]
    right_cols = [ee] if nblk == 2 else [1, 3]
    for b in left_rows:
        x = np.zeros((n, n), dtype=complex)
        x[:-1] += sq[:, None] * blocks[b, 1:]
        x[1:] += sq[:, None] * blocks[b, :-1]
        out[b] -= 1j * lam * x
    for b in right_cols:
        x = np.zeros((n, n), dtype=complex)
        x[:, 1:] += blocks[b, :, :-1] * sq[None, :]
        x[:, :-1] += blocks[b, :, 1:] * sq[None, :]
        out[b] += 1j * lam * x

    # -i Omega [S_z, rho] and gamma D[S-]
    out[0] += 2.0 * gam * blocks[ee]
    out[ee] -= 2.0 * gam * blocks[ee]
    if nblk == 4:
        out[1] -= (gam - 1j * om) * blocks[1]
        out[2] -= (gam + 1j * om) * blocks[2]
    return out


def _ladder_pop_rhs(gamma, lam, omega_ph, r_down, r_up):
    def f(t, y):
        return lindblad_ladder(y, gamma(t), 0.0, lam, omega_ph, r_down, r_up)
    return f


def ladder_advance(y0, t0, t1, h, rtol, atol, lam, omega_ph, r_down, r_up,
                   mode, a, b, c, p, max_steps):
    """Advance populations-only blocks (2, n, n) from t0 to exactly t1.

    Explicit 8th-order Dormand-Prince steps with scipy's error norm and step
    control. Returns ``(y, h_next, n_accepted, n_rejected, status)``.
    """
    y = np.array(y0, dtype=complex)
    if y.ndim != 3 or y.shape[0] != 2 or y.shape[1] != y.shape[2]:
        raise ValueError(f"expected blocks of shape (2, n, n), got {y.shape}")
    f = _ladder_pop_rhs(_gamma_source(mode, a, b, c, p), lam, omega_ph, r_down, r_up)
    A, B, C, E3, E5 = _DOP853.A, _DOP853.B, _DOP853.C, _DOP853.E3, _DOP853.E5
    stages = len(B)
    K = np.empty((stages + 1,) + y.shape, dtype=complex)
    n_complex = y.size
    t = t0
    n_acc = n_rej = 0
    status = STATUS_OK
    K[0] = f(t, y)
    while t < t1:
        if n_acc + n_rej >= max_steps:
            status = STATUS_MAX_STEPS
            break
        rejected = False
        while True:
            if h < 10.0 * abs(t) * 2.220446049250313e-16 or h <= 0.0:
                status = STATUS_STEP_UNDERFLOW
                break
            h_prop = h
            clipped = t + h >= t1
            if clipped:
                h = t1 - t
            for s in range(1, stages):
                dy = np.tensordot(A[s, :s], K[:s], axes=1)
                K[s] = f(t + C[s] * h, y + h * dy)
            y_new = y + h * np.tensordot(B, K[:stages], axes=1)
            K[stages] = f(t + h, y_new)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err5 = float(np.sum(np.abs(np.tensordot(E5, K, axes=1) / scale) ** 2))
            err3 = float(np.sum(np.abs(np.tensordot(E3, K, axes=1) / scale) ** 2))
            if err3 == 0.0 and err5 == 0.0:
                err = 0.0
            else:
                err = h * err5 / math.sqrt((err5 + 0.01 * err3) * n_complex)
            if err < 1.0:
                fac = 10.0 if err == 0.0 else min(10.0, 0.9 * err**-0.125)
                if rejected:
                    fac = min(1.0, fac)
                t = t1 if clipped else t + h
                y = y_new
                K[0] = K[stages]
                n_acc += 1
                h *= fac
                if clipped and h_prop > h:
                    h = h_prop
                break
            n_rej += 1
            rejected = True
            h *= max(0.2, 0.9 * err**-0.125)
        if status != STATUS_OK:
            break
    return y, h, n_acc, n_rej, status
