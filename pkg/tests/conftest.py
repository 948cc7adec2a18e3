import numpy as np
import pytest

import qdslab as q


def random_psd(rng, d, scale=1.0):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * (a @ a.conj().T) / d


def random_herm(rng, d):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (a + a.conj().T)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def two_state_birth():
    """Rates (1, 2): every Laplace-domain quantity has a hand value."""
    return q.build_pure_birth([1.0, 2.0], 1)


@pytest.fixture
def lindblad4():
    return q.build_bounded_lindblad(4, 7)
