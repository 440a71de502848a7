# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: factorized rate sums, periodic Hermite lookup and the
Dormand-Prince moment integrator. Mirrors ``_fallback`` call for call."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport free, malloc
from scipy.integrate import DOP853 as _DOP853
from libc.math cimport cos, sin, sqrt, fabs, fmod, floor, pow

cnp.import_array()

MODE_PROFILE = 0
MODE_EXACT = 1

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_MAX_STEPS = 2

DEF NSTATE = 10

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920
cdef double E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40
cdef double D1 = -12715105075.0 / 11282082432, D3 = 87487479700.0 / 32700410799
cdef double D4 = -10690763975.0 / 1880347072, D5 = 701980252875.0 / 199316789632
cdef double D6 = -1453857185.0 / 822651844, D7 = 69997945.0 / 29380423


cdef struct RateData:
    int mode
    const double* a
    const double* b
    const double* c
    Py_ssize_t n
    double p


cdef inline double _hermite(const double* vals, const double* ders, Py_ssize_t n,
                            double period, double t) noexcept nogil:
    cdef double h = period / n
    cdef double tau = fmod(t, period)
    if tau < 0.0:
        tau += period
    tau /= h
    cdef Py_ssize_t k = <Py_ssize_t>floor(tau)
    if k >= n:
        k = n - 1
    cdef double s = tau - k
    cdef Py_ssize_t k1 = k + 1
    if k1 >= n:
        k1 = 0
    cdef double s2 = s * s
    cdef double s3 = s2 * s
    return ((2 * s3 - 3 * s2 + 1) * vals[k] + (s3 - 2 * s2 + s) * h * ders[k]
            + (3 * s2 - 2 * s3) * vals[k1] + (s3 - s2) * h * ders[k1])


cdef inline double _exact_gamma(const double* m, const double* cw, const double* c,
                                Py_ssize_t n, double omega, double t) noexcept nogil:
    cdef double fr = 0.0, fi = 0.0, gr = 0.0, gi = 0.0, ph, cs, sn
    cdef Py_ssize_t i
    for i in range(n):
        ph = omega * t * m[i]
        cs = cos(ph)
        sn = sin(ph)
        fr += cw[i] * cs
        fi += cw[i] * sn
        gr += c[i] * cs
        gi += c[i] * sn
    return fr * gr + fi * gi


cdef inline double _gamma(RateData* rd, double t) noexcept nogil:
    if rd.mode == 0:
        return _hermite(rd.a, rd.b, rd.n, rd.p, t)
    return _exact_gamma(rd.a, rd.b, rd.c, rd.n, rd.p, t)


cdef inline void _rhs(double t, const double* y, double* out, RateData* rd,
                      double lam, double omega_ph, double kappa, double nbar) noexcept nogil:
    cdef double gam = _gamma(rd, t)
    cdef double s_ee = y[0], z1r = y[1], z1i = y[2], nb = y[3], sn = y[4]
    cdef double z2r = y[5], z2i = y[6], z3r = y[7], z3i = y[8], bb = y[9]
    cdef double d1 = 2.0 * gam + kappa
    cdef double d2 = 2.0 * (gam + kappa)
    cdef double d3 = 2.0 * gam + 3.0 * kappa
    out[0] = -2.0 * gam * s_ee
    out[1] = -d1 * z1r + omega_ph * z1i
    out[2] = -d1 * z1i - omega_ph * z1r - lam * s_ee
    out[3] = -2.0 * lam * z1i - 2.0 * kappa * nb + 2.0 * kappa * nbar
    out[4] = -2.0 * (gam + kappa) * sn + 2.0 * kappa * nbar * s_ee - 2.0 * lam * z1i
    out[5] = -d2 * z2r + 2.0 * omega_ph * z2i + 2.0 * lam * z1i
    out[6] = -d2 * z2i - 2.0 * omega_ph * z2r - 2.0 * lam * z1r
    out[7] = -d3 * z3r + omega_ph * z3i - lam * z2i + 4.0 * kappa * nbar * z1r
    out[8] = -d3 * z3i - omega_ph * z3r + lam * (z2r - 2.0 * sn) + 4.0 * kappa * nbar * z1i
    out[9] = -4.0 * lam * z3i - 4.0 * kappa * bb + 8.0 * kappa * nbar * nb


def rates_factorized(const double[::1] m, const double[::1] cw_gamma, const double[::1] cw_omega,
                     const double[::1] c, double omega, times):
    cdef double[::1] ts = np.ascontiguousarray(times, dtype=np.float64)
    cdef Py_ssize_t nt = ts.shape[0], n = m.shape[0], i, k
    out = np.empty((4, nt))
    cdef double[:, ::1] o = out
    cdef double ph, cs, sn, w, fr, fi, ur, ui, gr, gi, dgr, dgi, dfr, dfi, dur, dui
    with nogil:
        for k in range(nt):
            fr = fi = ur = ui = gr = gi = 0.0
            dfr = dfi = dur = dui = dgr = dgi = 0.0
            for i in range(n):
                ph = omega * ts[k] * m[i]
                cs = cos(ph)
                sn = sin(ph)
                w = omega * m[i]
                fr += cw_gamma[i] * cs
                fi += cw_gamma[i] * sn
                ur += cw_omega[i] * cs
                ui += cw_omega[i] * sn
                gr += c[i] * cs
                gi += c[i] * sn
                # d/dt e^{i w t} = i w e^{i w t}
                dfr -= w * cw_gamma[i] * sn
                dfi += w * cw_gamma[i] * cs
                dur -= w * cw_omega[i] * sn
                dui += w * cw_omega[i] * cs
                dgr -= w * c[i] * sn
                dgi += w * c[i] * cs
            o[0, k] = fr * gr + fi * gi
            o[1, k] = dfr * gr + dfi * gi + fr * dgr + fi * dgi
            o[2, k] = ur * gr + ui * gi
            o[3, k] = dur * gr + dui * gi + ur * dgr + ui * dgi
    return out[0], out[1], out[2], out[3]


def hermite_periodic(const double[::1] values, const double[::1] derivs, double period, times):
    cdef double[::1] ts = np.ascontiguousarray(times, dtype=np.float64)
    cdef Py_ssize_t nt = ts.shape[0], k, n = values.shape[0]
    out = np.empty(nt)
    cdef double[::1] o = out
    with nogil:
        for k in range(nt):
            o[k] = _hermite(&values[0], &derivs[0], n, period, ts[k])
    return out


def integrate_moments(y0, t_out, double lam, double omega_ph, double kappa, double nbar,
                      int mode, a, b, c, double p, double tol, long max_steps):
    """Dormand-Prince 5(4) on the 10-component moment system with dense output.

    Returns ``(Y, status, t_last, n_accepted, n_rejected)``.
    """
    cdef double[::1] ts = np.ascontiguousarray(t_out, dtype=np.float64)
    cdef const double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(c if c is not None else a, dtype=np.float64)
    cdef double[::1] yv0 = np.ascontiguousarray(y0, dtype=np.float64)
    if mode != 0 and mode != 1:
        raise ValueError(f"unknown rate mode {mode}")
    cdef Py_ssize_t n_out = ts.shape[0]
    Yarr = np.full((n_out, NSTATE), np.nan)
    cdef double[:, ::1] Y = Yarr
    cdef RateData rd
    rd.mode = mode
    rd.a = &av[0]
    rd.b = &bv[0]
    rd.c = &cv[0]
    rd.n = av.shape[0]
    rd.p = p

    cdef double y[NSTATE]
    cdef double ynew[NSTATE]
    cdef double tmp[NSTATE]
    cdef double k1[NSTATE]
    cdef double k2[NSTATE]
    cdef double k3[NSTATE]
    cdef double k4[NSTATE]
    cdef double k5[NSTATE]
    cdef double k6[NSTATE]
    cdef double k7[NSTATE]
    cdef double r2, r3, r4, r5, th, th1, e, sc, err, fac, tnew, ay, an
    cdef Py_ssize_t i, i_out = 1
    cdef long n_acc = 0, n_rej = 0
    cdef int status = 0
    cdef double t = ts[0]
    cdef double t_end = ts[n_out - 1]
    cdef double h = 1e-3

    for i in range(NSTATE):
        y[i] = yv0[i]
        Y[0, i] = y[i]
    if t_end > t and t_end - t < h:
        h = t_end - t

    with nogil:
        _rhs(t, y, k1, &rd, lam, omega_ph, kappa, nbar)
        while i_out < n_out:
            if n_acc + n_rej >= max_steps:
                status = 2
                break
            if h < 16.0 * 2.220446049250313e-16 * (fabs(t) if fabs(t) > 1.0 else 1.0):
                status = 1
                break
            for i in range(NSTATE):
                tmp[i] = y[i] + h * (A21 * k1[i])
            _rhs(t + C2 * h, tmp, k2, &rd, lam, omega_ph, kappa, nbar)
            for i in range(NSTATE):
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
            _rhs(t + C3 * h, tmp, k3, &rd, lam, omega_ph, kappa, nbar)
            for i in range(NSTATE):
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            _rhs(t + C4 * h, tmp, k4, &rd, lam, omega_ph, kappa, nbar)
            for i in range(NSTATE):
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            _rhs(t + C5 * h, tmp, k5, &rd, lam, omega_ph, kappa, nbar)
            for i in range(NSTATE):
                tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
            _rhs(t + h, tmp, k6, &rd, lam, omega_ph, kappa, nbar)
            for i in range(NSTATE):
                ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
            _rhs(t + h, ynew, k7, &rd, lam, omega_ph, kappa, nbar)
            err = 0.0
            for i in range(NSTATE):
                e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
                ay = fabs(y[i])
                an = fabs(ynew[i])
                sc = tol + tol * (ay if ay > an else an)
                err += (e / sc) * (e / sc)
            err = sqrt(err / NSTATE)
            if err <= 1.0:
                tnew = t + h
                while i_out < n_out and ts[i_out] <= tnew:
                    th = (ts[i_out] - t) / h
                    th1 = 1.0 - th
                    for i in range(NSTATE):
                        r2 = ynew[i] - y[i]
                        r3 = h * k1[i] - r2
                        r4 = r2 - h * k7[i] - r3
                        r5 = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                        Y[i_out, i] = y[i] + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)))
                    i_out += 1
                t = tnew
                for i in range(NSTATE):
                    y[i] = ynew[i]
                    k1[i] = k7[i]
                n_acc += 1
                if err == 0.0:
                    fac = 5.0
                else:
                    fac = 0.9 * pow(err, -0.2)
                    if fac > 5.0:
                        fac = 5.0
                    if fac < 0.2:
                        fac = 0.2
            else:
                n_rej += 1
                fac = 0.9 * pow(err, -0.2)
                if fac < 0.2:
                    fac = 0.2
                if fac > 1.0:
                    fac = 1.0
            h *= fac
    return Yarr, status, t, n_acc, n_rej


cdef void _ladder_block(const double* v, double* o, Py_ssize_t n,
                       const double* sq, const double* loss, double omega_ph,
                       double r_down, double r_up, double lam_left, double lam_right,
                       double self_re, double self_im) noexcept nogil:
    # v, o: n x n complex matrices as interleaved (re, im) doubles
    cdef Py_ssize_t i, j, p, row = 2 * n
    cdef double dr, di, w, wl, wu
    cdef const double* vr
    cdef const double* vu
    cdef const double* vd
    cdef double* orow
    for i in range(n):
        vr = v + i * row
        orow = o + i * row
        for j in range(n):
            p = 2 * j
            dr = self_re - loss[i] - loss[j]
            di = self_im - omega_ph * (i - j)
            orow[p] = dr * vr[p] - di * vr[p + 1]
            orow[p + 1] = dr * vr[p + 1] + di * vr[p]
        # 2 r_down b rho b+ couples (i, j) to (i + 1, j + 1)
        if i + 1 < n:
            vd = vr + row
            w = 2.0 * r_down * sq[i + 1]
            for j in range(n - 1):
                p = 2 * j
                orow[p] += w * sq[j + 1] * vd[p + 2]
                orow[p + 1] += w * sq[j + 1] * vd[p + 3]
        # 2 r_up b+ rho b couples (i, j) to (i - 1, j - 1)
        if i > 0:
            vu = vr - row
            w = 2.0 * r_up * sq[i]
            for j in range(1, n):
                p = 2 * j
                orow[p] += w * sq[j] * vu[p - 2]
                orow[p + 1] += w * sq[j] * vu[p - 1]
        # -i lam_left (b + b+) rho: rows i +- 1; -i (x + iy) = y - ix
        if lam_left != 0.0:
            wl = lam_left * sq[i + 1] if i + 1 < n else 0.0
            wu = lam_left * sq[i] if i > 0 else 0.0
            vd = vr + row if i + 1 < n else vr
            vu = vr - row if i > 0 else vr
            for j in range(n):
                p = 2 * j
                orow[p] += wl * vd[p + 1] + wu * vu[p + 1]
                orow[p + 1] -= wl * vd[p] + wu * vu[p]
        # +i lam_right rho (b + b+): columns j -+ 1; i (x + iy) = -y + ix
        if lam_right != 0.0:
            for j in range(1, n):
                p = 2 * j
                w = lam_right * sq[j]
                orow[p] -= w * vr[p - 1]
                orow[p + 1] += w * vr[p - 2]
            for j in range(n - 1):
                p = 2 * j
                w = lam_right * sq[j + 1]
                orow[p] -= w * vr[p + 3]
                orow[p + 1] += w * vr[p + 2]


def lindblad_ladder(const double complex[:, :, ::1] blocks, double gam, double om,
                    double lam, double omega_ph, double r_down, double r_up):
    """Effective emitter-phonon Lindblad generator on emitter blocks.

    ``blocks`` has shape (4, n, n) ordered gg, ge, eg, ee, or (2, n, n)
    holding gg, ee only (valid while the emitter coherences vanish).
    """
    cdef Py_ssize_t nblk = blocks.shape[0], n = blocks.shape[1], i, k, nn
    if nblk != 2 and nblk != 4:
        raise ValueError(f"expected 2 or 4 emitter blocks, got {nblk}")
    out_arr = np.empty((nblk, n, n), dtype=np.complex128)
    cdef double complex[:, :, ::1] out = out_arr
    cdef double[::1] sq = np.sqrt(np.arange(n + 1, dtype=np.float64))
    cdef double[::1] loss = np.empty(n)
    cdef Py_ssize_t ee = nblk - 1
    cdef double* po
    cdef const double* pe
    for i in range(n):
        loss[i] = r_down * i + r_up * ((i + 1.0) if i < n - 1 else 0.0)
    nn = n * n
    with nogil:
        _ladder_block(<const double*>&blocks[0, 0, 0], <double*>&out[0, 0, 0], n, &sq[0],
                      &loss[0], omega_ph, r_down, r_up, 0.0, 0.0, 0.0, 0.0)
        _ladder_block(<const double*>&blocks[ee, 0, 0], <double*>&out[ee, 0, 0], n, &sq[0],
                      &loss[0], omega_ph, r_down, r_up, lam, lam, -2.0 * gam, 0.0)
        if nblk == 4:
            _ladder_block(<const double*>&blocks[1, 0, 0], <double*>&out[1, 0, 0], n, &sq[0],
                          &loss[0], omega_ph, r_down, r_up, 0.0, lam, -gam, om)
            _ladder_block(<const double*>&blocks[2, 0, 0], <double*>&out[2, 0, 0], n, &sq[0],
                          &loss[0], omega_ph, r_down, r_up, lam, 0.0, -gam, -om)
        po = <double*>&out[0, 0, 0]
        pe = <const double*>&blocks[ee, 0, 0]
        for k in range(2 * nn):
            po[k] += 2.0 * gam * pe[k]
    return out_arr


# 8th-order Dormand-Prince tableau as published by scipy (12 stages + FSAL)
DEF RK8_STAGES = 12
cdef double RK8_A[RK8_STAGES][RK8_STAGES]
cdef double RK8_B[RK8_STAGES]
cdef double RK8_C[RK8_STAGES]
cdef double RK8_E3[RK8_STAGES + 1]
cdef double RK8_E5[RK8_STAGES + 1]


def _load_tableau():
    cdef int i, j
    for i in range(RK8_STAGES):
        for j in range(RK8_STAGES):
            RK8_A[i][j] = _DOP853.A[i, j]
        RK8_B[i] = _DOP853.B[i]
        RK8_C[i] = _DOP853.C[i]
    for i in range(RK8_STAGES + 1):
        RK8_E3[i] = _DOP853.E3[i]
        RK8_E5[i] = _DOP853.E5[i]


_load_tableau()


cdef struct LadderData:
    Py_ssize_t n
    const double* sq
    const double* loss
    double lam
    double omega_ph
    double r_down
    double r_up
    RateData* rd


cdef inline void _herm_get(const double* x, Py_ssize_t n, Py_ssize_t i, Py_ssize_t j,
                           double* re, double* im) noexcept nogil:
    # packed Hermitian: x[i, j] = Re rho_ij (j >= i), x[j, i] = Im rho_ij (j > i)
    if j > i:
        re[0] = x[i * n + j]
        im[0] = x[j * n + i]
    elif j == i:
        re[0] = x[i * n + i]
        im[0] = 0.0
    else:
        re[0] = x[j * n + i]
        im[0] = -x[i * n + j]


cdef void _herm_block(const double* x, double* o, Py_ssize_t n, const double* sq,
                      const double* loss, double omega_ph, double r_down, double r_up,
                      double lam, double self_rate) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double vr, vi, ar, ai, dr, di, w, ur, ui
    for i in range(n):
        for j in range(i, n):
            _herm_get(x, n, i, j, &vr, &vi)
            dr = self_rate - loss[i] - loss[j]
            di = -omega_ph * (i - j)
            ar = dr * vr - di * vi
            ai = dr * vi + di * vr
            if j + 1 < n:
                w = 2.0 * r_down * sq[i + 1] * sq[j + 1]
                ar += w * x[(i + 1) * n + j + 1]
                if j > i:
                    ai += w * x[(j + 1) * n + i + 1]
            if i > 0:
                w = 2.0 * r_up * sq[i] * sq[j]
                ar += w * x[(i - 1) * n + j - 1]
                if j > i:
                    ai += w * x[(j - 1) * n + i - 1]
            if lam != 0.0:
                # -i lam [(b + b+) rho - rho (b + b+)]_ij
                ur = 0.0
                ui = 0.0
                if i + 1 < n:
                    _herm_get(x, n, i + 1, j, &vr, &vi)
                    ur += sq[i + 1] * vr
                    ui += sq[i + 1] * vi
                if i > 0:
                    _herm_get(x, n, i - 1, j, &vr, &vi)
                    ur += sq[i] * vr
                    ui += sq[i] * vi
                if j > 0:
                    _herm_get(x, n, i, j - 1, &vr, &vi)
                    ur -= sq[j] * vr
                    ui -= sq[j] * vi
                if j + 1 < n:
                    _herm_get(x, n, i, j + 1, &vr, &vi)
                    ur -= sq[j + 1] * vr
                    ui -= sq[j + 1] * vi
                ar += lam * ui
                ai -= lam * ur
            o[i * n + j] = ar
            if j > i:
                o[j * n + i] = ai


cdef void _ladder_pop_rhs(double t, const double* y, double* out, LadderData* ld) noexcept nogil:
    # state = [rho_gg, rho_ee], each a packed Hermitian n x n block
    cdef Py_ssize_t n = ld.n, blk = n * n, k
    cdef double gam = _gamma(ld.rd, t)
    _herm_block(y, out, n, ld.sq, ld.loss, ld.omega_ph, ld.r_down, ld.r_up, 0.0, 0.0)
    _herm_block(y + blk, out + blk, n, ld.sq, ld.loss, ld.omega_ph, ld.r_down, ld.r_up,
                ld.lam, -2.0 * gam)
    for k in range(blk):
        out[k] += 2.0 * gam * y[blk + k]


cdef void _combine(const double* y, const double* K, Py_ssize_t D, double h,
                   const double* coef, int s, double* out) noexcept nogil:
    # out = y + h * sum_j coef[j] K[j] over the nonzero coefficients, one pass
    cdef int idx[RK8_STAGES]
    cdef double w[RK8_STAGES]
    cdef int m = 0, j
    cdef Py_ssize_t k
    cdef double acc
    for j in range(s):
        if coef[j] != 0.0:
            idx[m] = j
            w[m] = h * coef[j]
            m += 1
    for k in range(D):
        acc = y[k]
        for j in range(m):
            acc += w[j] * K[idx[j] * D + k]
        out[k] = acc


cdef double _error_norm(const double* y, const double* ynew, const double* K,
                        Py_ssize_t n, double h, double rtol, double atol) noexcept nogil:
    # scipy's DOP853 norm over the full complex blocks, from the packed form
    cdef Py_ssize_t blk, i, j, D = 2 * n * n, off, u, l
    cdef int q
    cdef double e3r, e3i, e5r, e5i, a2, b2, sc2, wgt, err3 = 0.0, err5 = 0.0
    for blk in range(2):
        off = blk * n * n
        for i in range(n):
            for j in range(i, n):
                u = off + i * n + j
                l = off + j * n + i
                e3r = 0.0
                e5r = 0.0
                e3i = 0.0
                e5i = 0.0
                for q in range(RK8_STAGES + 1):
                    e3r += RK8_E3[q] * K[q * D + u]
                    e5r += RK8_E5[q] * K[q * D + u]
                    if j > i:
                        e3i += RK8_E3[q] * K[q * D + l]
                        e5i += RK8_E5[q] * K[q * D + l]
                if j > i:
                    a2 = y[u] * y[u] + y[l] * y[l]
                    b2 = ynew[u] * ynew[u] + ynew[l] * ynew[l]
                    wgt = 2.0
                else:
                    a2 = y[u] * y[u]
                    b2 = ynew[u] * ynew[u]
                    wgt = 1.0
                sc2 = atol + rtol * sqrt(max(a2, b2))
                sc2 = sc2 * sc2
                err3 += wgt * (e3r * e3r + e3i * e3i) / sc2
                err5 += wgt * (e5r * e5r + e5i * e5i) / sc2
    if err3 == 0.0 and err5 == 0.0:
        return 0.0
    return h * err5 / sqrt((err5 + 0.01 * err3) * D)


def _pack(blocks):
    # blocks: (2, n, n); note wraparound=False forbids negative indices here
    b = np.asarray(blocks)
    n = b.shape[2]
    upper = np.triu(np.ones((n, n), dtype=bool))
    out = np.where(upper, b.real, np.swapaxes(b.imag, 1, 2))
    return np.ascontiguousarray(out, dtype=np.float64)


def _unpack(x):
    up = np.triu(x) + 1j * np.triu(np.swapaxes(x, 1, 2), 1)
    return up + np.conj(np.swapaxes(np.triu(up, 1), 1, 2))


def ladder_advance(y0, double t0, double t1, double h, double rtol, double atol,
                   double lam, double omega_ph, double r_down, double r_up,
                   int mode, a, b, c, double p, long max_steps):
    """Advance Hermitian populations-only blocks (2, n, n) from t0 to exactly t1.

    Explicit 8th-order Dormand-Prince steps with scipy's error norm and step
    control; the blocks are packed into n x n real arrays internally.
    Returns ``(y, h_next, n_accepted, n_rejected, status)``.
    """
    yc = np.asarray(y0)
    if yc.ndim != 3 or yc.shape[0] != 2 or yc.shape[1] != yc.shape[2]:
        raise ValueError(f"expected blocks of shape (2, n, n), got {yc.shape}")
    if mode != 0 and mode != 1:
        raise ValueError(f"unknown rate mode {mode}")
    yarr = _pack(yc)
    cdef Py_ssize_t n = yarr.shape[1]
    cdef Py_ssize_t D = 2 * n * n
    cdef const double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(c if c is not None else a, dtype=np.float64)
    cdef double[::1] sq = np.sqrt(np.arange(n + 1, dtype=np.float64))
    cdef double[::1] loss = np.empty(n)
    cdef Py_ssize_t i
    for i in range(n):
        loss[i] = r_down * i + r_up * ((i + 1.0) if i < n - 1 else 0.0)
    cdef RateData rd
    rd.mode = mode
    rd.a = &av[0]
    rd.b = &bv[0]
    rd.c = &cv[0]
    rd.n = av.shape[0]
    rd.p = p
    cdef LadderData ld
    ld.n = n
    ld.sq = &sq[0]
    ld.loss = &loss[0]
    ld.lam = lam
    ld.omega_ph = omega_ph
    ld.r_down = r_down
    ld.r_up = r_up
    ld.rd = &rd

    cdef double* y = <double*>cnp.PyArray_DATA(yarr)
    Karr = np.empty((RK8_STAGES + 1, D))
    tmp_arr = np.empty(D)
    ynew_arr = np.empty(D)
    cdef double* K = <double*>cnp.PyArray_DATA(Karr)
    cdef double* tmp = <double*>cnp.PyArray_DATA(tmp_arr)
    cdef double* ynew = <double*>cnp.PyArray_DATA(ynew_arr)

    cdef double t = t0, err, fac, h_prop
    cdef long n_acc = 0, n_rej = 0
    cdef int status = 0, s, clipped, rejected
    cdef Py_ssize_t k
    with nogil:
        _ladder_pop_rhs(t, y, K, &ld)
        while t < t1:
            if n_acc + n_rej >= max_steps:
                status = 2
                break
            rejected = 0
            while True:
                if h < 10.0 * fabs(t) * 2.220446049250313e-16 or h <= 0.0:
                    status = 1
                    break
                h_prop = h
                clipped = 0
                if t + h >= t1:
                    h = t1 - t
                    clipped = 1
                for s in range(1, RK8_STAGES):
                    _combine(y, K, D, h, RK8_A[s], s, tmp)
                    _ladder_pop_rhs(t + RK8_C[s] * h, tmp, K + s * D, &ld)
                _combine(y, K, D, h, RK8_B, RK8_STAGES, ynew)
                _ladder_pop_rhs(t + h, ynew, K + RK8_STAGES * D, &ld)
                err = _error_norm(y, ynew, K, n, h, rtol, atol)
                if err < 1.0:
                    fac = 10.0 if err == 0.0 else min(10.0, 0.9 * pow(err, -0.125))
                    if rejected:
                        fac = min(1.0, fac)
                    t = t1 if clipped else t + h
                    for k in range(D):
                        y[k] = ynew[k]
                        K[k] = K[RK8_STAGES * D + k]
                    n_acc += 1
                    h = h * fac
                    if clipped and h_prop > h:
                        h = h_prop
                    break
                n_rej += 1
                rejected = 1
                h = h * max(0.2, 0.9 * pow(err, -0.125))
            if status != 0:
                break
    return _unpack(yarr), h, n_acc, n_rej, status
