import numpy as np
import pytest

from gkslmap import TimeGrid, corpus_kernels


@pytest.fixture(scope="session")
def corpus():
    """The shared seeded kernel corpus (small slice; acceptance uses 20)."""
    return corpus_kernels(6)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def grid_short():
    return TimeGrid(1.0, 100)
