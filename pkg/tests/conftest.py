import numpy as np
import pytest

from grslab.sampling import sample_points


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def chart_points():
    """Points of the cotangent chart: base in [0.1, 2]^2, fiber in [-1, 1]^2."""
    return sample_points([(0.1, 2.0)] * 2 + [(-1.0, 1.0)] * 2, 1000, 42)


@pytest.fixture(scope="session")
def base_points():
    return sample_points([(0.1, 2.0)] * 2, 1000, 42)
