import numpy as np
import pytest

from optophonon import (
    ModulationSignal,
    SystemParams,
    build_coefficients,
    build_rate_profile,
)
from optophonon.rates import ExactRates

REFERENCE = SystemParams(g=0.1, delta_c=0.0, lam=6.0, omega_ph=2.0, kappa=1.0, nbar=1.0)


@pytest.fixture(scope="session")
def params():
    return REFERENCE


@pytest.fixture(scope="session")
def modulated_table():
    return build_coefficients(ModulationSignal(1.0, (10.0,)), 150)


@pytest.fixture(scope="session")
def trivial_table():
    return build_coefficients(ModulationSignal(1.0, ()), 150)


@pytest.fixture(scope="session")
def modulated_profile(params, modulated_table):
    return build_rate_profile(params, modulated_table, 4096)


@pytest.fixture(scope="session")
def trivial_profile(params, trivial_table):
    return build_rate_profile(params, trivial_table, 64)


@pytest.fixture(scope="session")
def modulated_exact(params, modulated_table):
    return ExactRates(params, modulated_table)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


class ConstantRates:
    """Rate source with fixed gamma and Omega."""

    kind = "exact"

    def __init__(self, gamma, omega=0.0):
        self._g = gamma
        self._o = omega

    def gamma(self, t):
        return self._g if np.ndim(t) == 0 else np.full(np.shape(t), self._g)

    def omega(self, t):
        return self._o if np.ndim(t) == 0 else np.full(np.shape(t), self._o)


# criterion number -> one-line verdict, echoed after the test session
CRITERIA = {}


def record_criterion(number, title, passed, detail):
    line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} | {detail}"
    CRITERIA[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
