import numpy as np
import pytest

from bellherald.model import ModelParams, build_operators


@pytest.fixture(scope="session")
def ops_strong():
    """Strong drive at the quarter-wavelength spacing (default coupling)."""
    return build_operators(ModelParams(alpha_mag=100.0))


@pytest.fixture(scope="session")
def ops_weak():
    """Weak drive, where the photon-counting engine is comfortable."""
    return build_operators(ModelParams(alpha_mag=5.0))


@pytest.fixture()
def rng():
    return np.random.default_rng(20260819)


def random_density(rng, n=4):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_state(rng, n=4):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)
