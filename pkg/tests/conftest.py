import numpy as np
import pytest
from hypothesis import settings

from cavmag import CouplingMode, CouplingSpec, ModeParams, build_system

MHZ = 1e6
GHZ = 1e9

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def two_mode(
    f_c=10 * GHZ,
    delta_m=0.0,
    beta=10 * MHZ,
    kappa=0.0,
    alpha=2 * MHZ,
    gamma=0.0,
    j=0.0,
    gamma_d=0.0,
    theta=0.0,
    from_bath=False,
):
    cav = ModeParams("cavity", f_c, beta, kappa)
    mag = ModeParams("magnon", f_c + delta_m, alpha, gamma)
    if from_bath:
        spec = CouplingSpec(j=j, theta=theta, mode=CouplingMode.FROM_BATH)
    else:
        spec = CouplingSpec(j=j, gamma_d=gamma_d, theta=theta)
    return build_system([cav, mag], [(0, 1, spec)])


def mixed_asym_params(delta_m=-160 * MHZ):
    """Strongly damped cavity with both coupling kinds (sharp one-sided feature)."""
    f_c = 10 * GHZ
    return {
        "f_c": f_c,
        "f_m": f_c + delta_m,
        "kappa": 880 * MHZ,
        "beta": 15 * MHZ,
        "alpha": 1.1 * MHZ,
        "gamma": 0.0,
        "J": 10 * MHZ,
        "Gamma": 10 * MHZ,
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
