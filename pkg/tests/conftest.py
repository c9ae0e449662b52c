import numpy as np
import pytest

from dppc.ground import discretize, finite_space
from dppc.kernels import Kernel, random_hermitian_kernel


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_kernel(rng, n, weights=None, complex_=True, eigenvalues=None):
    w = rng.uniform(0.5, 2.0, n) if weights is None else weights
    return random_hermitian_kernel(finite_space(n, w), rng, eigenvalues=eigenvalues, complex_=complex_)


def rank_one(space, phi):
    """Rank-one projection phi phi^* normalised in L^2(mu)."""
    phi = np.asarray(phi, dtype=complex)
    phi = phi / np.sqrt(np.sum(np.abs(phi) ** 2 * space.weights))
    return Kernel(space, np.outer(phi, phi.conj()), hermitian=True, claimed_projection=True)


@pytest.fixture
def sine_grid():
    return discretize("real-interval", 40, bounds=(-3.0, 3.0))
