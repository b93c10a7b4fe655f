import numpy as np
import pytest

from udwqrf import FockSpace, Species, aligned_decay_grids


@pytest.fixture
def detector():
    return Species(1.0, 0.5)


@pytest.fixture
def aligned_space(detector):
    ex, g, ph = aligned_decay_grids(detector, resolution=4, n_excited=9, n_ground=17, n_photon=8)
    return FockSpace(detector, ex, g, ph)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_state(space, rng, sectors=None):
    st = space.zeros()
    for s in sectors or space.sectors:
        shape = space.shape(s)
        st.amps[s][...] = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return st


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
