import numpy as np
import pytest

from biparity.pauli import TwoQubitState

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}


def random_density(rng, rank=None):
    rank = rank or int(rng.integers(1, 5))
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def brute_coefficients(rho):
    """r_ij = Tr(rho kron(sigma_i, sigma_j)) with explicit loops."""
    r = np.zeros((4, 4))
    for a, pa in enumerate("IXYZ"):
        for b, pb in enumerate("IXYZ"):
            r[a, b] = np.trace(rho @ np.kron(PAULIS[pa], PAULIS[pb])).real
    return r


def random_state(rng, rank=None):
    return TwoQubitState(brute_coefficients(random_density(rng, rank)))


def random_unit(rng, size=None):
    shape = (3,) if size is None else (size, 3)
    v = rng.normal(size=shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
