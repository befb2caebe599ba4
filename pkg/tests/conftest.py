import numpy as np
import pytest

from diamondlab.haar import SeededRng


@pytest.fixture
def gen():
    return SeededRng(20261019, 7).generator()


def assert_close(a, b, atol=1e-12):
    np.testing.assert_allclose(np.asarray(a), np.asarray(b), atol=atol, rtol=0)
