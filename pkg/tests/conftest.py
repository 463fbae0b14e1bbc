import numpy as np
import pytest

from disnav.sim import Observation
from disnav.world import WorldSpec, generate_world


@pytest.fixture(scope="session")
def straight_world():
    """Zero-curvature world: centerline along +x from the origin."""
    return generate_world(
        WorldSpec(seed=1, length_m=60, max_curvature=0.0, obstacle_density=0.0, driveway_rate=0.0)
    )


@pytest.fixture(scope="session")
def curvy_world():
    return generate_world(WorldSpec(seed=11, length_m=80, obstacle_density=2.5, driveway_rate=4.0))


def random_observation(rng) -> Observation:
    from disnav.sim import GRID_SIDE

    return Observation(classes=rng.integers(0, 5, size=(GRID_SIDE, GRID_SIDE)).astype(np.uint8))
