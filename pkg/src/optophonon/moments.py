"""Closed expectation-value dynamics of the emitter-phonon system.

Because S_ee is a projector that commutes with the emitter-phonon coupling,
the hierarchy of moments closes exactly on

    <S_ee>, <b+b>, <b+^2 b^2>, <S_ee b>, <S_ee b+b>, <S_ee b^2>, <S_ee b+ b^2>

and their conjugates. Complex moments are stored as (re, im) pairs; their
conjugates are never stored, so the real observables stay real by
construction.
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from . import kernels
from .rates import SystemParams

G2_FLOOR = 1e-12


class IntegrationError(RuntimeError):
    """The adaptive integrator could not reach the end time.

    ``t_last`` is the last accepted time; ``series`` holds the rows computed
    before the failure.
    """

    def __init__(self, message, t_last, series=None):
        super().__init__(f"{message} (last good time {t_last:.9g})")
        self.t_last = t_last
        self.series = series


@dataclass(frozen=True)
class MomentState:
    s_ee: float = 0.0
    seeb_re: float = 0.0
    seeb_im: float = 0.0
    nb: float = 0.0
    seendb: float = 0.0
    seeb2_re: float = 0.0
    seeb2_im: float = 0.0
    seebdb2_re: float = 0.0
    seebdb2_im: float = 0.0
    b2b2: float = 0.0

    @classmethod
    def reference(cls, nbar: float, s_ee: float = 1.0) -> "MomentState":
        """Excited emitter (weight ``s_ee``) on a thermal phonon field."""
        return cls(s_ee=s_ee, nb=nbar, seendb=s_ee * nbar, b2b2=2.0 * nbar * nbar)

    @classmethod
    def from_array(cls, y) -> "MomentState":
        return cls(*(float(v) for v in y))

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @property
    def seeb(self) -> complex:
        return complex(self.seeb_re, self.seeb_im)

    @property
    def seeb2(self) -> complex:
        return complex(self.seeb2_re, self.seeb2_im)

    @property
    def seebdb2(self) -> complex:
        return complex(self.seebdb2_re, self.seebdb2_im)


InitialConditions = MomentState
STATE_FIELDS = tuple(f.name for f in fields(MomentState))


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Output rows on a monotone time grid (units of 1/kappa_c)."""

    times: np.ndarray
    states: np.ndarray
    gamma: np.ndarray
    extra: dict | None = None

    def column(self, name: str) -> np.ndarray:
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
        return derive_g2(self)

    def __len__(self):
        return len(self.times)


def derive_g2(series: TimeSeries) -> np.ndarray:
    """<b+^2 b^2> / <b+b>^2, NaN where <b+b> < 1e-12."""
    nb = series.nb
    b2b2 = series.b2b2
    out = np.full(len(nb), np.nan)
    ok = nb >= G2_FLOOR
    out[ok] = b2b2[ok] / nb[ok] ** 2
    return out


def _as_array(state) -> np.ndarray:
    if isinstance(state, MomentState):
        return state.to_array()
    y = np.asarray(state, dtype=float)
    if y.shape != (10,):
        raise ValueError(f"moment state must have 10 components, got shape {y.shape}")
    return y


def rhs_moments(state, t: float, params: SystemParams, rate_source) -> np.ndarray:
    """Time derivative of the 10 real components at time ``t``.

    ``rate_source`` is anything with a ``gamma(t)`` method. Terms of the form
    i lam (z - conj z) are written as -2 lam Im z.
    """
    from ._fallback import moment_rhs

    gam = float(rate_source.gamma(float(t)))
    return moment_rhs(_as_array(state), gam, params.lam, params.omega_ph,
                      params.kappa, params.nbar)


def output_grid(t_end: float, output_dt: float) -> np.ndarray:
    if not (t_end > 0.0 and math.isfinite(t_end)):
        raise ValueError(f"t_end must be > 0, got {t_end!r}")
    if not (output_dt > 0.0 and math.isfinite(output_dt)):
        raise ValueError(f"output_dt must be > 0, got {output_dt!r}")
    n = int(math.floor(t_end / output_dt + 1e-9))
    times = output_dt * np.arange(n + 1)
    if t_end - times[-1] > 1e-12 * max(1.0, t_end):
        times = np.append(times, t_end)
    return times


def simulate_moments(params: SystemParams, ics, rate_source, t_end: float = 100.0,
                     output_dt: float = 0.05, tol: float = 1e-9,
                     max_steps: int = 50_000_000, backend=None) -> TimeSeries:
    """Integrate the moment system with adaptive Dormand-Prince 5(4).

    ``backend`` picks a kernel module (see :func:`kernels.backends`); by
    default the compiled one when available.
    """
    if not 1e-12 <= tol <= 1e-4:
        raise ValueError(f"tol must lie in [1e-12, 1e-4], got {tol!r}")
    impl = backend if backend is not None else kernels.impl
    times = output_grid(t_end, output_dt)
    y0 = _as_array(ics)
    mode, a, b, c, p = rate_source.kernel_args()
    Y, status, t_last, n_acc, n_rej = impl.integrate_moments(
        y0, times, params.lam, params.omega_ph, params.kappa, params.nbar,
        mode, a, b, c, p, tol, max_steps,
    )
    info = {"steps": int(n_acc), "rejected": int(n_rej), "backend": getattr(impl, "__name__", "")}
    series = TimeSeries(times, Y, np.asarray(rate_source.gamma(times)), info)
    if status != kernels.STATUS_OK:
        reason = "step size underflow" if status == kernels.STATUS_STEP_UNDERFLOW else "step limit reached"
        good = ~np.isnan(Y[:, 0])
        partial = TimeSeries(times[good], Y[good], series.gamma[good], info)
        raise IntegrationError(f"moment integration failed: {reason}", float(t_last), partial)
    return series


def series_from_rows(times, rows, gamma, extra=None) -> TimeSeries:
    return TimeSeries(np.asarray(times, dtype=float), np.asarray(rows, dtype=float),
                      np.asarray(gamma, dtype=float), extra)

