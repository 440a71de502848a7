"""Phonon dynamics of a frequency-modulated two-level emitter coupled to a bad
cavity and to one vibrational mode.

The cavity is eliminated adiabatically, leaving a time-periodic decay rate
gamma(t) and level shift Omega(t); the emitter-phonon moments then obey a
closed linear system. A density-matrix integrator on a truncated Fock space
serves as the reference. All quantities are in units of the cavity damping.
"""
__version__ = "0.1.0"

from .analysis import effective_lifetime, summarize, time_above, time_below
from .config import (
    ConfigError,
    RunConfig,
    SweepSpec,
    default_config,
    load_config,
    load_sweep,
)
from .modulation import (
    CoefficientTable,
    ModulationSignal,
    build_coefficients,
    coefficient_tail_mass,
    evaluate_signal,
)
from .moments import (
    InitialConditions,
    IntegrationError,
    MomentState,
    TimeSeries,
    derive_g2,
    rhs_moments,
    simulate_moments,
)
from .oracle import (
    CutoffError,
    EffectiveGenerator,
    apply_generator,
    full_model_simulate,
    simulate_oracle,
)
from .rates import (
    ExactRates,
    RateProfile,
    SystemParams,
    average_gamma,
    build_rate_profile,
    gamma_at,
    omega_at,
    rates_double_sum,
)
from .special import bessel_j, bessel_j_row

__all__ = [
    "CoefficientTable",
    "ConfigError",
    "CutoffError",
    "EffectiveGenerator",
    "ExactRates",
    "InitialConditions",
    "IntegrationError",
    "ModulationSignal",
    "MomentState",
    "RateProfile",
    "RunConfig",
    "SweepSpec",
    "SystemParams",
    "TimeSeries",
    "apply_generator",
    "average_gamma",
    "bessel_j",
    "bessel_j_row",
    "build_coefficients",
    "build_rate_profile",
    "coefficient_tail_mass",
    "default_config",
    "derive_g2",
    "effective_lifetime",
    "evaluate_signal",
    "full_model_simulate",
    "gamma_at",
    "load_config",
    "load_sweep",
    "omega_at",
    "rates_double_sum",
    "rhs_moments",
    "simulate_moments",
    "simulate_oracle",
    "summarize",
    "time_above",
    "time_below",
]
