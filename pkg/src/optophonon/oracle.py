"""Density-matrix reference dynamics on a truncated Hilbert space.

Two models are integrated here, both in the Schroedinger-picture Lindblad
form with the dissipator convention

    D[O] rho = 2 O rho O+ - O+O rho - rho O+O.

* The effective emitter-phonon model: H = w_ph b+b + lam S_ee (b + b+)
  + Omega(t) S_z, with dissipators gamma(t) D[S-], kappa (1 + nbar) D[b]
  and kappa nbar D[b+].
* The full emitter-cavity-phonon model before the cavity is eliminated.

Basis ordering is emitter (g, e) x [cavity 0..Nc] x phonon 0..N.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.integrate import DOP853, quad

from . import kernels
from .modulation import ModulationSignal, evaluate_signal
from .moments import STATE_FIELDS, MomentState, output_grid
from .rates import SystemParams

log = logging.getLogger(__name__)

TAIL_LIMIT = 1e-8
HERMITIAN_LIMIT = 1e-9


class CutoffError(RuntimeError):
    """Fock cutoff escalation exceeded its configured maximum."""


def default_cutoff(params: SystemParams) -> int:
    return int(math.ceil(4.0 * (params.nbar + 1.0) + 8.0 * (params.lam / max(params.omega_ph, 1e-12)) ** 2))


def destroy(n_levels: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, n_levels)), 1, format="csr", dtype=complex)


def thermal_populations(nbar: float, n_levels: int) -> np.ndarray:
    if nbar == 0.0:
        p = np.zeros(n_levels)
        p[0] = 1.0
        return p
    ratio = nbar / (nbar + 1.0)
    p = ratio ** np.arange(n_levels) / (nbar + 1.0)
    return p / p.sum()


def _dag(op):
    return op.conj().T.tocsr()


def _rmul(rho, op):
    """rho @ op for dense rho and sparse op."""
    return (op.T @ rho.T).T


class LindbladModel:
    """Generic time-dependent Lindblad generator.

    ``hamiltonian`` is a fixed sparse part; ``h_terms`` are (f(t), op)
    pairs added to it; ``jumps`` are (rate(t), op) with rate either a float
    or a callable.
    """

    def __init__(self, hamiltonian, h_terms, jumps):
        self.dim = hamiltonian.shape[0]
        self.h0 = hamiltonian.tocsr()
        self.h_terms = [(f, op.tocsr()) for f, op in h_terms]
        self.jumps = []
        for rate, op in jumps:
            op = op.tocsr()
            dag = _dag(op)
            self.jumps.append((rate, op, dag, (dag @ op).tocsr()))

    def hamiltonian(self, t):
        h = self.h0
        for f, op in self.h_terms:
            h = h + f(t) * op
        return h

    def __call__(self, t, rho):
        """d rho / dt."""
        h = self.hamiltonian(t)
        drho = -1j * (h @ rho - _rmul(rho, h))
        for rate, op, dag, dagop in self.jumps:
            r = rate(t) if callable(rate) else rate
            if r == 0.0:
                continue
            jump = _rmul(op @ rho, dag)
            drho += r * (2.0 * jump - dagop @ rho - _rmul(rho, dagop))
        return drho


@dataclass
class EffectiveGenerator:
    """Emitter x phonon generator driven by a rate source's gamma and Omega."""

    params: SystemParams
    rate_source: object
    fock_cutoff: int

    def __post_init__(self):
        n = self.fock_cutoff + 1
        p = self.params
        b = destroy(n)
        eye_ph = sp.identity(n, format="csr", dtype=complex)
        see2 = sp.csr_matrix(np.array([[0, 0], [0, 1]], dtype=complex))
        sz2 = sp.csr_matrix(np.diag([-0.5, 0.5]).astype(complex))
        sm2 = sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex))
        eye2 = sp.identity(2, format="csr", dtype=complex)
        self.ops = {
            "b": sp.kron(eye2, b, format="csr"),
            "S_ee": sp.kron(see2, eye_ph, format="csr"),
            "S_z": sp.kron(sz2, eye_ph, format="csr"),
            "S_minus": sp.kron(sm2, eye_ph, format="csr"),
        }
        bb = self.ops["b"]
        bd = _dag(bb)
        h0 = p.omega_ph * (bd @ bb) + p.lam * (self.ops["S_ee"] @ (bb + bd))
        src = self.rate_source
        self.model = LindbladModel(
            h0,
            [(lambda t: float(src.omega(t)), self.ops["S_z"])],
            [
                (lambda t: float(src.gamma(t)), self.ops["S_minus"]),
                (p.kappa * (1.0 + p.nbar), bb),
                (p.kappa * p.nbar, bd),
            ],
        )

    @property
    def dim(self):
        return self.model.dim

    def initial_state(self, s_ee: float = 1.0) -> np.ndarray:
        """s_ee |e><e| + (1 - s_ee) |g><g|, tensored with a thermal phonon field."""
        th = thermal_populations(self.params.nbar, self.fock_cutoff + 1)
        return np.diag(np.concatenate([(1.0 - s_ee) * th, s_ee * th])).astype(complex)

    def moments(self, rho) -> np.ndarray:
        return _effective_moments(self.ops, rho)

    def tail(self, rho) -> float:
        n = self.fock_cutoff + 1
        d = np.real(np.diag(rho))
        return float(d[n - 1] + d[2 * n - 1])


class LadderRHS:
    """The effective generator acting on rho stored as emitter blocks.

    Block k holds the phonon matrix <a| rho |c> for (a, c) in gg, ge, eg, ee;
    ladder operators become index shifts, evaluated by the kernel backend.
    Numerically equivalent to ``EffectiveGenerator.model`` on the full matrix.
    Nothing in the effective model feeds the emitter coherences, so with
    ``populations_only`` only gg and ee are carried.
    """

    def __init__(self, params: SystemParams, rate_source, fock_cutoff: int,
                 populations_only: bool = False, backend=None):
        self.n = fock_cutoff + 1
        self.p = params
        self.src = rate_source
        self.populations_only = populations_only
        self.impl = backend if backend is not None else kernels.impl
        self.r_down = params.kappa * (1.0 + params.nbar)
        self.r_up = params.kappa * params.nbar

    def __call__(self, t, blocks):
        p = self.p
        om = 0.0 if self.populations_only else float(self.src.omega(t))
        return self.impl.lindblad_ladder(
            blocks, float(self.src.gamma(t)), om, p.lam, p.omega_ph, self.r_down, self.r_up,
        )

    def to_blocks(self, rho):
        n = self.n
        full = rho.reshape(2, n, 2, n).transpose(0, 2, 1, 3).reshape(4, n, n)
        if not self.populations_only:
            return np.ascontiguousarray(full)
        if np.any(full[1] != 0) or np.any(full[2] != 0):
            raise ValueError("populations_only requires vanishing emitter coherences")
        return np.ascontiguousarray(full[[0, 3]])

    def from_blocks(self, blocks):
        n = self.n
        if self.populations_only:
            full = np.zeros((4, n, n), dtype=complex)
            full[0] = blocks[0]
            full[3] = blocks[1]
            blocks = full
        return blocks.reshape(2, 2, n, n).transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)


def _expect(op, rho) -> complex:
    """Tr(op rho) for sparse op."""
    return complex((op.multiply(rho.T)).sum())


def _effective_moments(ops, rho) -> np.ndarray:
    b = ops["b"]
    see = ops["S_ee"]
    bd = _dag(b)
    seeb = see @ b
    vals = {
        "s_ee": _expect(see, rho),
        "seeb": _expect(seeb, rho),
        "nb": _expect(bd @ b, rho),
        "seendb": _expect(see @ bd @ b, rho),
        "seeb2": _expect(seeb @ b, rho),
        "seebdb2": _expect(see @ bd @ b @ b, rho),
        "b2b2": _expect(bd @ bd @ b @ b, rho),
    }
    return np.array([
        vals["s_ee"].real, vals["seeb"].real, vals["seeb"].imag, vals["nb"].real,
        vals["seendb"].real, vals["seeb2"].real, vals["seeb2"].imag,
        vals["seebdb2"].real, vals["seebdb2"].imag, vals["b2b2"].real,
    ])


def apply_generator(rho, t: float, gen: EffectiveGenerator) -> np.ndarray:
    """d rho/dt under the effective generator at time ``t``."""
    rho = np.asarray(rho, dtype=complex)
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITIAN_LIMIT:
        raise ValueError(f"density matrix is not Hermitian (deviation {herm:.2e})")
    return gen.model(t, rho)


@dataclass(frozen=True, eq=False)
class OracleSeries:
    """Moment columns from a density-matrix run plus state diagnostics."""

    times: np.ndarray
    states: np.ndarray
    gamma: np.ndarray
    trace_err: np.ndarray
    min_eig: np.ndarray
    tail: np.ndarray
    fock_cutoff: int

    def column(self, name):
        return self.states[:, STATE_FIELDS.index(name)]

    @property
    def s_ee(self):
        return self.column("s_ee")

    @property
    def nb(self):
        return self.column("nb")

    @property
    def b2b2(self):
        return self.column("b2b2")

    @property
    def g2(self):
        from .moments import derive_g2

        return derive_g2(self)

    def __len__(self):
        return len(self.times)


def _integrate(rhs, rho0, times, tol, observe):
    """DOP853 over flattened complex rho, calling ``observe(t, rho)`` at ``times``."""
    shape = rho0.shape
    y0 = rho0.reshape(-1)

    def f(t, y):
        return rhs(t, y.reshape(shape)).reshape(-1)

    out = [observe(times[0], rho0)]
    solver = DOP853(f, times[0], y0, times[-1], rtol=tol, atol=tol * 1e-2)
    i = 1
    while i < len(times):
        msg = solver.step()
        if solver.status == "failed":
            raise RuntimeError(f"oracle integration failed at t={solver.t:.6g}: {msg}")
        if solver.t >= times[i] or solver.status == "finished":
            dense = solver.dense_output()
            while i < len(times) and times[i] <= solver.t:
                out.append(observe(times[i], dense(times[i]).reshape(shape)))
                i += 1
    return out


def _advance_kernel(ladder, rate_source, blocks0, times, tol, observe, backend):
    """Step the populations-only blocks with the compiled 8th-order stepper,
    landing exactly on every output time."""
    impl = backend if backend is not None else kernels.impl
    p = ladder.p
    mode, a, b, c, period = rate_source.kernel_args()
    out = [observe(times[0], blocks0)]
    y = blocks0
    h = 1e-3
    for t0, t1 in zip(times[:-1], times[1:]):
        y, h, _, _, status = impl.ladder_advance(
            y, float(t0), float(t1), h, tol, tol * 1e-2, p.lam, p.omega_ph,
            ladder.r_down, ladder.r_up, mode, a, b, c, period, 10_000_000,
        )
        if status != kernels.STATUS_OK:
            raise RuntimeError(f"oracle integration failed near t={t0:.6g} (status {status})")
        out.append(observe(t1, y))
    return out


def _run_effective(params, rate_source, cutoff, times, tol, s_ee0, monitor_eigs,
                   engine="kernel", backend=None):
    gen = EffectiveGenerator(params, rate_source, cutoff)
    ladder = LadderRHS(params, rate_source, cutoff, populations_only=True, backend=backend)
    blocks0 = ladder.to_blocks(gen.initial_state(s_ee0))

    def observe(t, blocks):
        rho = ladder.from_blocks(blocks)
        min_eig = math.nan
        if monitor_eigs:
            # rho is block diagonal in the emitter index
            min_eig = min(float(np.linalg.eigvalsh(0.5 * (x + x.conj().T))[0]) for x in blocks)
        return (gen.moments(rho), abs(np.trace(rho).real - 1.0), min_eig, gen.tail(rho))

    if engine == "kernel" and hasattr(rate_source, "kernel_args"):
        rows = _advance_kernel(ladder, rate_source, blocks0, times, tol, observe, backend)
    elif engine in ("kernel", "scipy"):
        rows = _integrate(ladder, blocks0, times, tol, observe)
    else:
        raise ValueError(f"unknown engine {engine!r}; expected 'kernel' or 'scipy'")
    return OracleSeries(
        times=times,
        states=np.array([r[0] for r in rows]),
        gamma=np.asarray(rate_source.gamma(times)),
        trace_err=np.array([r[1] for r in rows]),
        min_eig=np.array([r[2] for r in rows]),
        tail=np.array([r[3] for r in rows]),
        fock_cutoff=cutoff,
    )


def _initial_weight(params: SystemParams, ics) -> float:
    if ics is None:
        return 1.0
    ref = MomentState.reference(params.nbar, ics.s_ee)
    if not np.allclose(ref.to_array(), ics.to_array(), rtol=0.0, atol=1e-12):
        raise ValueError("the oracle only starts from s_ee |e><e| + (1 - s_ee) |g><g| "
                         "on a thermal phonon field")
    return ics.s_ee


def simulate_oracle(params: SystemParams, ics, rate_source, fock_cutoff: int | None = None,
                    t_end: float = 100.0, output_dt: float = 0.05, tol: float = 1e-9,
                    max_cutoff: int = 200, escalate: bool = True,
                    monitor_eigs: bool = True, engine: str = "kernel",
                    backend=None) -> OracleSeries:
    """Integrate the effective model and trace out the moment columns.

    When the top Fock level ever holds more than 1e-8 the run is repeated
    with a 1.5x larger cutoff, up to ``max_cutoff``.

    ``engine="kernel"`` steps with the 8th-order Dormand-Prince kernel of the
    selected backend; ``engine="scipy"`` hands the same right-hand side to
    ``scipy.integrate.DOP853`` (slower, fully independent stepping code).
    """
    s_ee0 = _initial_weight(params, ics)
    cutoff = int(fock_cutoff) if fock_cutoff is not None else default_cutoff(params)
    if cutoff < 1:
        raise ValueError(f"fock_cutoff must be >= 1, got {cutoff}")
    times = output_grid(t_end, output_dt)
    while True:
        series = _run_effective(params, rate_source, cutoff, times, tol, s_ee0, monitor_eigs,
                                engine, backend)
        worst = float(np.max(series.tail))
        if worst <= TAIL_LIMIT or not escalate:
            return series
        nxt = int(math.ceil(1.5 * cutoff))
        if nxt > max_cutoff:
            raise CutoffError(
                f"Fock level {cutoff} holds {worst:.2e} > {TAIL_LIMIT:g}; "
                f"escalation to {nxt} exceeds max_cutoff={max_cutoff}"
            )
        log.info("raising Fock cutoff %d -> %d (tail %.2e)", cutoff, nxt, worst)
        cutoff = nxt


def fft_coefficients(signal: ModulationSignal, M: int, samples: int | None = None) -> np.ndarray:
    """C_m for |m| <= M from an FFT of exp(i Phi(t)) sampled over one period.

    Independent of the Bessel machinery; returns the real parts (the
    imaginary parts vanish for cosine harmonics).
    """
    M = int(M)
    if samples is None:
        span = M + sum(abs(a) / signal.omega for a in signal.amplitudes)
        samples = 1 << int(math.ceil(math.log2(max(64, 4 * (2 * span + 1)))))
    t = np.arange(samples) * (signal.period / samples)
    phase = np.zeros(samples)
    for j, a in enumerate(signal.amplitudes, start=1):
        phase += a / (j * signal.omega) * np.sin(j * signal.omega * t)
    spectrum = np.fft.fft(np.exp(1j * phase)) / samples
    orders = np.arange(-M, M + 1)
    return np.real(spectrum[orders % samples])


def quadrature_population(rate_source, times, s_ee0: float = 1.0) -> np.ndarray:
    """s_ee0 * exp(-2 int_0^t gamma) at ``times`` by adaptive quadrature,
    accumulated interval by interval."""
    times = np.asarray(times, dtype=float)
    integral = np.zeros(len(times))
    for k in range(1, len(times)):
        part, _ = quad(lambda u: float(rate_source.gamma(u)), times[k - 1], times[k],
                       epsabs=1e-14, epsrel=1e-12, limit=200)
        integral[k] = integral[k - 1] + part
    return s_ee0 * np.exp(-2.0 * integral)


@dataclass(frozen=True, eq=False)
class FullModelSeries:
    times: np.ndarray
    s_ee: np.ndarray
    nb: np.ndarray
    b2b2: np.ndarray
    photons: np.ndarray
    trace_err: np.ndarray


def full_model_simulate(params: SystemParams, signal: ModulationSignal | None = None,
                        cavity_cutoff: int = 3, fock_cutoff: int = 20,
                        t_end: float = 20.0, output_dt: float = 0.05,
                        tol: float = 1e-8, s_ee0: float = 1.0) -> FullModelSeries:
    """Emitter-cavity-phonon Lindblad dynamics in the frame rotating at w_0.

    H = dc a+a + w_ph b+b + s(t) S_z + g (a+ S- + S+ a) + lam S_ee (b + b+),
    dissipators kappa_c D[a], kappa (1 + nbar) D[b], kappa nbar D[b+].
    The cavity starts in vacuum.
    """
    if cavity_cutoff < 1:
        raise ValueError("cavity_cutoff must be >= 1")
    p = params
    nc = cavity_cutoff + 1
    nf = fock_cutoff + 1
    e2 = sp.identity(2, format="csr", dtype=complex)
    ec = sp.identity(nc, format="csr", dtype=complex)
    ef = sp.identity(nf, format="csr", dtype=complex)
    see = sp.kron(sp.kron(sp.csr_matrix(np.diag([0.0, 1.0]).astype(complex)), ec), ef, format="csr")
    sz = sp.kron(sp.kron(sp.csr_matrix(np.diag([-0.5, 0.5]).astype(complex)), ec), ef, format="csr")
    sm = sp.kron(sp.kron(sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex)), ec), ef, format="csr")
    a = sp.kron(sp.kron(e2, destroy(nc)), ef, format="csr")
    b = sp.kron(sp.kron(e2, ec), destroy(nf), format="csr")
    ad, bd, sp_ = _dag(a), _dag(b), _dag(sm)
    h0 = (p.delta_c * (ad @ a) + p.omega_ph * (bd @ b)
          + p.g * (ad @ sm + sp_ @ a) + p.lam * (see @ (b + bd)))
    h_terms = []
    if signal is not None and not signal.is_trivial:
        h_terms.append((lambda t: float(evaluate_signal(signal, t)), sz))
    model = LindbladModel(h0, h_terms, [
        (p.kappa_c, a),
        (p.kappa * (1.0 + p.nbar), b),
        (p.kappa * p.nbar, bd),
    ])
    th = thermal_populations(p.nbar, nf)
    vac = np.zeros(nc)
    vac[0] = 1.0
    diag = np.concatenate([(1.0 - s_ee0) * np.kron(vac, th), s_ee0 * np.kron(vac, th)])
    rho0 = np.diag(diag).astype(complex)
    n_ph = (bd @ b).tocsr()
    obs = [see, n_ph, (bd @ bd @ b @ b).tocsr(), (ad @ a).tocsr()]

    def observe(t, rho):
        vals = [_expect(op, rho).real for op in obs]
        return vals + [abs(np.trace(rho).real - 1.0)]

    times = output_grid(t_end, output_dt)
    rows = np.array(_integrate(model, rho0, times, tol, observe))
    return FullModelSeries(times, rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], rows[:, 4])
