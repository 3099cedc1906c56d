import time

import pytest

from gravcav.energy_model import paper_model
from gravcav.gravity import DensityProfile
from gravcav.pipeline import solve


@pytest.fixture(scope="session")
def model():
    return paper_model()


@pytest.fixture(scope="session")
def unit_density():
    return DensityProfile.constant(1.0)


@pytest.fixture(scope="session")
def no_gravity():
    return DensityProfile.constant(0.0)


def _timed_solve(model, lam):
    t0 = time.process_time()
    out = solve(model, DensityProfile.constant(1.0), lam)
    return out, time.process_time() - t0


@pytest.fixture(scope="session")
def solve_a(model):
    """Hybrid solve at lambda = 1, rho0 = 1 with its CPU time."""
    return _timed_solve(model, 1.0)


@pytest.fixture(scope="session")
def solve_b(model):
    """Hybrid solve at lambda = 1.15, rho0 = 1 with its CPU time."""
    return _timed_solve(model, 1.15)
