import numpy as np
import pytest

from ustlab.rng import RngStream


@pytest.fixture(scope="session")
def green():
    """Process-wide Green table (one Dirichlet solve, reused everywhere)."""
    from ustlab import lattice

    return lattice.green_table()


@pytest.fixture()
def rng():
    return RngStream(20260809)


def pytest_configure(config):
    np.seterr(all="raise", under="ignore")
