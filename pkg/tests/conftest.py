import numpy as np
import pytest

from precboot import Dataset, RngSpec, center


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_centered(values) -> Dataset:
    return center(Dataset(np.asarray(values, dtype=np.float64)))


def gram_dataset(gram, n=4):
    """A centered dataset whose Gram matrix Y'Y/n equals ``gram`` exactly.

    Uses orthonormal mean-zero basis vectors scaled by the Cholesky factor;
    only supports p = 2 with n = 4.
    """
    gram = np.asarray(gram, dtype=np.float64)
    assert gram.shape == (2, 2) and n == 4
    z = np.column_stack([
        np.array([1.0, -1.0, 1.0, -1.0]) / 2.0,
        np.array([1.0, 1.0, -1.0, -1.0]) / 2.0,
    ])
    chol = np.linalg.cholesky(gram)
    return Dataset(2.0 * z @ chol.T, centered=True)
