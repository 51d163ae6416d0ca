import numpy as np
import pytest

from weightsketch.nn import Batch, NetworkShape


class ZeroNoise:
    """Stand-in noise source that always draws zeros."""

    def standard_normal(self, size=None):
        return np.zeros(size if size is not None else ())


@pytest.fixture
def tiny_shape():
    return NetworkShape(input_dim=4, hidden_dims=(3,), output_dim=2)


@pytest.fixture
def tiny_batch():
    rng = np.random.default_rng(11)
    return Batch(inputs=rng.random((5, 4)), labels=rng.integers(0, 2, 5))
