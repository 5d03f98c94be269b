import numpy as np
import pytest

from tendonkin import RobotGeometry, helical_routing

N_LINKS = 10
LINK = 0.017
LIMIT = np.pi / 6
INSET = 0.002
OFFSET = 0.005


def make_robot(n=N_LINKS, link=LINK, phases=(0.0,), turns=0.0, radius=OFFSET, limit=LIMIT):
    ell = np.full(n, link)
    tendons = tuple(helical_routing(ell, radius, p, turns, inset=INSET) for p in phases)
    return RobotGeometry(n, ell, limit, tendons)


@pytest.fixture
def parallel_robot():
    """Ten links, one straight tendon on the +x side."""
    return make_robot()


@pytest.fixture
def opposed_robot():
    return make_robot(phases=(0.0, np.pi))


@pytest.fixture
def helical_robot():
    """Three tendons 120 degrees apart, each winding half a turn."""
    return make_robot(phases=(0.0, 2 * np.pi / 3, 4 * np.pi / 3), turns=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
