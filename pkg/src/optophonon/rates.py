"""Time-periodic decay rate gamma(t) and level shift Omega(t) left behind by
adiabatically eliminating a bad cavity from a frequency-modulated emitter.

Both are double sums over the coefficient table,

    gamma(t) = sum_{m,n} C_m C_n g^2 kc / (kc^2 + (m w - dc)^2) cos((m - n) w t)
    Omega(t) = sum_{m,n} C_m C_n g^2 (m w - dc) / (kc^2 + (m w - dc)^2) cos((m - n) w t)

and factor into Re[F(t) conj(G(t))] with single sums F and G, which is the
O(M) path used everywhere except in :func:`rates_double_sum`.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .modulation import CoefficientTable

log = logging.getLogger(__name__)

BAD_CAVITY_WARN = 0.3


@dataclass(frozen=True)
class SystemParams:
    """Physical rates in units of the cavity damping kappa_c.

    ``delta_c`` is the cavity-emitter detuning; the bare frequencies only
    ever appear through it.
    """

    g: float = 0.1
    delta_c: float = 0.0
    lam: float = 6.0
    omega_ph: float = 2.0
    kappa: float = 1.0
    nbar: float = 1.0
    kappa_c: float = 1.0

    def __post_init__(self):
        for name in ("g", "delta_c", "lam", "omega_ph", "kappa", "nbar", "kappa_c"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        for name in ("g", "lam", "omega_ph", "kappa", "nbar"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if self.kappa_c <= 0.0:
            raise ValueError(f"kappa_c must be > 0, got {self.kappa_c!r}")
        if self.g / self.kappa_c > BAD_CAVITY_WARN:
            warnings.warn(
                f"g/kappa_c = {self.g / self.kappa_c:g} is outside the bad-cavity regime",
                stacklevel=3,
            )


def _weights(params: SystemParams, table: CoefficientTable, m):
    detuning = m * table.omega - params.delta_c
    denom = params.kappa_c**2 + detuning**2
    g2 = params.g**2
    return g2 * params.kappa_c / denom, g2 * detuning / denom


def _kernel_arrays(params: SystemParams, table: CoefficientTable):
    m, c = table.nonzero()
    wg, wo = _weights(params, table, m.astype(float))
    return (
        np.ascontiguousarray(m, dtype=float),
        np.ascontiguousarray(c * wg),
        np.ascontiguousarray(c * wo),
        np.ascontiguousarray(c, dtype=float),
    )


def _scalar_or_array(t, values):
    return float(values[0]) if np.ndim(t) == 0 else values


def gamma_at(params: SystemParams, table: CoefficientTable, t):
    """Pseudo-damping gamma(t); scalar or array ``t``."""
    m, cwg, cwo, c = _kernel_arrays(params, table)
    gam, _, _, _ = kernels.rates_factorized(m, cwg, cwo, c, table.omega, np.atleast_1d(t))
    return _scalar_or_array(t, gam)


def omega_at(params: SystemParams, table: CoefficientTable, t):
    """Frequency shift Omega(t); scalar or array ``t``."""
    m, cwg, cwo, c = _kernel_arrays(params, table)
    _, _, om, _ = kernels.rates_factorized(m, cwg, cwo, c, table.omega, np.atleast_1d(t))
    return _scalar_or_array(t, om)


def rates_double_sum(params: SystemParams, table: CoefficientTable, t):
    """Reference O(M^2) evaluation of (gamma, Omega) at scalar ``t``.

    Sums over the full stored index range, zeros included.
    """
    m = table.orders.astype(float)
    c = np.asarray(table.values)
    wg, wo = _weights(params, table, m)
    cosines = np.cos(np.subtract.outer(m, m) * table.omega * float(t))
    pair = np.outer(c, c) * cosines
    return float(np.sum(pair * wg[:, None])), float(np.sum(pair * wo[:, None]))


def average_gamma(params: SystemParams, table: CoefficientTable) -> float:
    """Period average of gamma(t): only the m = n terms survive."""
    m = table.orders.astype(float)
    wg, _ = _weights(params, table, m)
    return float(np.sum(np.asarray(table.values) ** 2 * wg))


def gamma_minimum(params: SystemParams, table: CoefficientTable, samples: int = 4096) -> float:
    """Smallest sampled gamma over one period (sign diagnostic)."""
    period = 2.0 * math.pi / table.omega
    t = np.arange(samples) * (period / samples)
    return float(np.min(gamma_at(params, table, t)))


class ExactRates:
    """Direct factorized evaluation of the rates at every requested time."""

    kind = "exact"

    def __init__(self, params: SystemParams, table: CoefficientTable):
        self.params = params
        self.table = table
        self._arrays = _kernel_arrays(params, table)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.table.omega

    def _eval(self, t):
        m, cwg, cwo, c = self._arrays
        return kernels.rates_factorized(m, cwg, cwo, c, self.table.omega, np.atleast_1d(t))

    def gamma(self, t):
        return _scalar_or_array(t, self._eval(t)[0])

    def omega(self, t):
        return _scalar_or_array(t, self._eval(t)[2])

    def kernel_args(self):
        m, cwg, _, c = self._arrays
        return kernels.MODE_EXACT, m, cwg, c, self.table.omega


@dataclass(frozen=True, eq=False)
class RateProfile:
    """gamma and Omega tabulated with exact time derivatives on a uniform grid
    over one period; lookups use periodic cubic Hermite interpolation."""

    period: float
    gamma_values: np.ndarray
    gamma_derivs: np.ndarray
    omega_values: np.ndarray
    omega_derivs: np.ndarray

    kind = "profile"

    @property
    def grid_size(self) -> int:
        return len(self.gamma_values)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.grid_size) * (self.period / self.grid_size)

    def gamma(self, t):
        out = kernels.hermite_periodic(self.gamma_values, self.gamma_derivs, self.period,
                                       np.atleast_1d(t))
        return _scalar_or_array(t, out)

    def omega(self, t):
        out = kernels.hermite_periodic(self.omega_values, self.omega_derivs, self.period,
                                       np.atleast_1d(t))
        return _scalar_or_array(t, out)

    def kernel_args(self):
        return kernels.MODE_PROFILE, self.gamma_values, self.gamma_derivs, None, self.period


def build_rate_profile(params: SystemParams, table: CoefficientTable,
                       grid_size: int = 4096) -> RateProfile:
    grid_size = int(grid_size)
    needed = 4 * table.n_significant
    if grid_size < max(needed, 4):
        raise ValueError(
            f"grid_size={grid_size} too coarse: need >= {needed} "
            f"(4 x {table.n_significant} significant coefficients)"
        )
    period = 2.0 * math.pi / table.omega
    t = np.arange(grid_size) * (period / grid_size)
    m, cwg, cwo, c = _kernel_arrays(params, table)
    gam, dgam, om, dom = kernels.rates_factorized(m, cwg, cwo, c, table.omega, t)
    arrays = [np.ascontiguousarray(a) for a in (gam, dgam, om, dom)]
    for a in arrays:
        a.setflags(write=False)
    gmin = float(np.min(gam))
    if gmin < 0.0:
        log.warning("gamma(t) dips below zero over the period: min %.3e", gmin)
    return RateProfile(period, *arrays)
