"""
Shared fixtures: desk-scale configs, seeded randomness, a two-party runner
"""
import random

import pytest

from config import GatewayConfig
from models.shared_point import SharedPoint
from services.ring_sharing import share
from services.session import run_two_party

MASK64 = (1 << 64) - 1


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def small_config():
    """2-d, l_D = 4: distances fit in 10 bits"""
    return GatewayConfig(bounds=((0.0, 1.0), (0.0, 1.0)), bits=64, rounding_bits=4, window=12, slide=3,
                         k=3, radius=8, epsilon=4, id_width=8, flag_width=16)


@pytest.fixture
def two_party(small_config):
    """
    run(fn0, fn1, config=None, seed=7) -> (result 0, result 1)

    Both functions get their PartySession; a dealer thread serves triples and OT.
    """
    def run(fn0, fn1=None, config=None, seed=7):
        return run_two_party(config or small_config, fn0, fn1 or fn0, seed=seed, timeout=60)
    return run


def share_points(coords_list, rng, bits=64, first_count=1, ids=None):
    """Secret-share rounded points: (party 0 points, party 1 points)"""
    side0, side1 = [], []
    for offset, coords in enumerate(coords_list):
        count = first_count + offset
        point_id = ids[offset] if ids else count
        pairs = [share(v, rng, bits) for v in coords]
        side0.append(SharedPoint(point_id, count, tuple(p[0].value for p in pairs), 0, bits))
        side1.append(SharedPoint(point_id, count, tuple(p[1].value for p in pairs), 1, bits))
    return side0, side1


def reconstruct_values(values0, values1, bits=64):
    mask = (1 << bits) - 1
    return [(a + b) & mask for a, b in zip(values0, values1)]
