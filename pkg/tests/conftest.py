import numpy as np
import pytest

from floodwalk.ingest import DemGrid
from floodwalk.synth import SynthConfig, gen_scene


@pytest.fixture(scope="session")
def small_scene():
    """Shared small synthetic scene (zero noise)."""
    return gen_scene(SynthConfig(blocks=2, keyframes=10, points_per_kf=20, seed=42))


@pytest.fixture
def flat_dem():
    def make(z=0.0, n=9, spacing=5.0, x0=-20.0, y0=20.0):
        return DemGrid(
            origin=(x0, y0), spacing=spacing, ncols=n, nrows=n,
            elevation=np.full((n, n), float(z)),
        )

    return make
