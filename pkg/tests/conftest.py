import numpy as np
import pytest

from cnav import tensor as T


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def strict_finite():
    """Enable the per-op NaN/Inf guard for the duration of a test."""
    with T.finite_checks():
        yield
