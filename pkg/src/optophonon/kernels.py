"""Backend selection for the hot kernels.

The compiled extension is used when importable; set
``OPTOPHONON_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _fallback

MODE_PROFILE = _fallback.MODE_PROFILE
MODE_EXACT = _fallback.MODE_EXACT
STATUS_OK = _fallback.STATUS_OK
STATUS_STEP_UNDERFLOW = _fallback.STATUS_STEP_UNDERFLOW
STATUS_MAX_STEPS = _fallback.STATUS_MAX_STEPS

compiled = None
if os.environ.get("OPTOPHONON_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled
    except ImportError:
        compiled = None

impl = compiled if compiled is not None else _fallback
BACKEND = "compiled" if compiled is not None else "python"

rates_factorized = impl.rates_factorized
hermite_periodic = impl.hermite_periodic
integrate_moments = impl.integrate_moments
lindblad_ladder = impl.lindblad_ladder
ladder_advance = impl.ladder_advance


def backends():
    """Available kernel implementations keyed by name."""
    out = {"python": _fallback}
    if compiled is not None:
        out["compiled"] = compiled
    return out
