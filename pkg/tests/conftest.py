import numpy as np
import pytest

from protonq import load_builtin_dmanh, reflection_symmetrize


@pytest.fixture(scope="session")
def builtin():
    return load_builtin_dmanh()


@pytest.fixture(scope="session")
def builtin_sym(builtin):
    return reflection_symmetrize(builtin)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
