"""Periodic modulation of the emitter transition and its phase-factor expansion.

A signal s(t) = sum_j A_j cos(j w t) accumulates the phase
Phi(t) = sum_j (A_j / (j w)) sin(j w t). The factor exp(i Phi(t)) is a
product of Jacobi-Anger series, one per harmonic, and its Fourier
coefficients C_m (on the base frequency w) are built here by multiplying
those series one harmonic at a time.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .special import bessel_j_row

DROP_BELOW = 1e-15


@dataclass(frozen=True)
class ModulationSignal:
    """s(t) = sum_{j>=1} A_j cos(j * omega * t), amplitudes in units of kappa_c.

    ``amplitudes[0]`` is A_1. There is no constant term and every phase is
    zero; nonzero ``phases`` are rejected.
    """

    omega: float
    amplitudes: tuple[float, ...] = ()
    phases: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        omega = float(self.omega)
        if not math.isfinite(omega) or omega <= 0.0:
            raise ValueError(f"base frequency omega must be > 0, got {self.omega!r}")
        amps = tuple(float(a) for a in self.amplitudes)
        if not all(math.isfinite(a) for a in amps):
            raise ValueError("harmonic amplitudes must be finite")
        if any(p != 0.0 for p in self.phases):
            raise ValueError("only zero phases are supported")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "phases", ())

    @property
    def j_max(self) -> int:
        return max(1, len(self.amplitudes))

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def is_trivial(self) -> bool:
        return all(a == 0.0 for a in self.amplitudes)

    def check_weak(self, omega0: float, ratio: float = 0.1) -> bool:
        """Warn unless every |A_j| is below ``ratio * omega0``.

        The bare transition frequency never enters the reduced dynamics, so
        this is a diagnostic only.
        """
        peak = max((abs(a) for a in self.amplitudes), default=0.0)
        ok = peak <= ratio * omega0
        if not ok:
            warnings.warn(
                f"modulation amplitude {peak:g} is not small against omega_0={omega0:g}",
                stacklevel=2,
            )
        return ok


def evaluate_signal(sig: ModulationSignal, t):
    """s(t); ``t`` may be a scalar or an array."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for j, a in enumerate(sig.amplitudes, start=1):
        if a != 0.0:
            out = out + a * np.cos(j * sig.omega * t)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CoefficientTable:
    """Fourier coefficients C_m of exp(i Phi(t)) for m in [-M, M].

    ``values[M + m]`` holds C_m. Arrays are read-only.
    """

    j_max: int
    m_max: int
    omega: float
    values: np.ndarray

    @property
    def M(self) -> int:
        return (len(self.values) - 1) // 2

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    def __getitem__(self, m: int) -> float:
        m = int(m)
        if abs(m) > self.M:
            return 0.0
        return float(self.values[self.M + m])

    def nonzero(self) -> tuple[np.ndarray, np.ndarray]:
        """Orders and values of the stored nonzero coefficients."""
        idx = np.flatnonzero(self.values)
        return idx - self.M, self.values[idx]

    @property
    def n_significant(self) -> int:
        return int(np.count_nonzero(self.values))

    def parseval_residual(self) -> float:
        return float(np.sum(self.values**2) - 1.0)

    def phase_factor(self, theta) -> np.ndarray:
        """sum_m C_m exp(i m theta)."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        m, c = self.nonzero()
        return np.exp(1j * np.outer(theta, m)) @ c


def build_coefficients(sig: ModulationSignal, m_max: int) -> CoefficientTable:
    """Truncated coefficients C_m, |m| <= j_max**2 * m_max.

    Harmonic j contributes sum_l J_l(A_j / (j w)) exp(i j l w t) with
    |l| <= m_max, so multiplying it into the running series maps
    C_k -> C_{k + j l}: only index shifts divisible by j receive weight,
    and the Bessel order is the shift divided by j.
    """
    m_max = int(m_max)
    if m_max < 1:
        raise ValueError(f"m_max must be >= 1, got {m_max}")
    j_max = sig.j_max
    M = j_max * j_max * m_max
    size = 2 * M + 1

    coeffs = np.zeros(size)
    a1 = sig.amplitudes[0] if sig.amplitudes else 0.0
    row = _signed_row(min(m_max, M), a1 / sig.omega)
    lo = M - (len(row) - 1) // 2
    coeffs[lo : lo + len(row)] = row

    for j in range(2, j_max + 1):
        a = sig.amplitudes[j - 1]
        if a == 0.0:
            continue
        weights = _signed_row(m_max, a / (j * sig.omega))
        nxt = np.zeros(size)
        for l, w in zip(range(-m_max, m_max + 1), weights):
            if w == 0.0:
                continue
            shift = j * l
            if shift >= 0:
                nxt[shift:] += w * coeffs[: size - shift]
            else:
                nxt[:shift] += w * coeffs[-shift:]
        coeffs = nxt

    coeffs[np.abs(coeffs) < DROP_BELOW] = 0.0
    coeffs.setflags(write=False)
    return CoefficientTable(j_max=j_max, m_max=m_max, omega=sig.omega, values=coeffs)


def _signed_row(n: int, x: float) -> np.ndarray:
    """J_{-n}(x)..J_n(x)."""
    pos = bessel_j_row(n, x)
    neg = pos[:0:-1].copy()
    neg[(n - np.arange(n)) % 2 == 1] *= -1.0
    return np.concatenate([neg, pos])


def coefficient_tail_mass(table: CoefficientTable, m_cut: int) -> float:
    """sum_{|m| > m_cut} C_m**2."""
    m_cut = int(m_cut)
    if not 0 <= m_cut <= table.M:
        raise ValueError(f"m_cut must lie in [0, {table.M}], got {m_cut}")
    m = table.orders
    return float(np.sum(table.values[np.abs(m) > m_cut] ** 2))
