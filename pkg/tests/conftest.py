import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from algphase.crystal import CrystalStructure, PattersonMap

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture
def pair_map():
    """Two centres of weight 2 on the a axis: the Patterson map of Z=(1,2)."""
    return PattersonMap(2, [2.0, 2.0], [(0.25, 0.0), (0.75, 0.0)])


@pytest.fixture
def pair_structure():
    return CrystalStructure([1.0, 2.0], [(0.0, 0.0), (0.25, 0.0)])


def direct_intensity(weights, deltas, h):
    """Independent double loop over centres."""
    total = 0.0
    for w, d in zip(weights, deltas):
        total += w * np.cos(2 * np.pi * sum(a * b for a, b in zip(h, d)))
    return total
