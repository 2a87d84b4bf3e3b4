import numpy as np
import pytest

from statsvd.tensor import qr_orthonormalize


@pytest.fixture
def rng():
    return np.random.default_rng(20240719)


def random_frame(rng, p, r):
    """Haar-ish orthonormal p x r frame."""
    return qr_orthonormalize(rng.standard_normal((p, r)))


def random_orthogonal(rng, r):
    return random_frame(rng, r, r)
