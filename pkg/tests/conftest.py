import numpy as np
import pytest

from awmi.raster import Raster, SyntheticSpec, generate_synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def small_random_raster(rng):
    """Strictly positive 10x12 raster (every pixel active)."""
    return Raster(rng.uniform(0.05, 1.0, size=(10, 12)))


@pytest.fixture
def smooth_raster():
    """Compactly supported smooth pattern in a 96x96 frame."""
    return generate_synthetic(SyntheticSpec("bumps", 96, 96, seed=5))
