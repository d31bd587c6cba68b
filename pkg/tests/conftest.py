import numpy as np
import pytest

from orbitcont import (
    IntegratorConfig,
    leading_floquet,
    linear_saddle,
    linear_saddle_orbit,
    lorenz,
    refine_periodic_orbit,
)

# Lorenz orbit guess used throughout: the short AB cycle of the classic
# parameter set.  Frozen refined values live in test_stability.
LORENZ_GUESS_POINT = np.array([-13.7638, -19.5789, 27.0])
LORENZ_GUESS_PERIOD = 1.5587


@pytest.fixture(scope="session")
def icfg():
    return IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12)


@pytest.fixture(scope="session")
def lorenz_field():
    return lorenz()


@pytest.fixture(scope="session")
def lorenz_po(lorenz_field, icfg):
    po = refine_periodic_orbit(LORENZ_GUESS_POINT, LORENZ_GUESS_PERIOD,
                               lorenz_field, icfg)
    po.mu1, po.u1 = leading_floquet(po, lorenz_field, icfg)
    return po


@pytest.fixture(scope="session")
def saddle3():
    return linear_saddle(0.3, 1.0, dim=3)


@pytest.fixture(scope="session")
def saddle3_po(saddle3):
    return linear_saddle_orbit(saddle3)


@pytest.fixture(scope="session")
def saddle6():
    return linear_saddle(0.3, 1.0, dim=6)


@pytest.fixture(scope="session")
def saddle6_po(saddle6):
    return linear_saddle_orbit(saddle6)
