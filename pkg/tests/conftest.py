import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from uplinksched.config import ExperimentConfig, build_population  # noqa: E402
from uplinksched.model import FrameConfig  # noqa: E402
from uplinksched.scheduler import CandidateGroup  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

TOY_COSTS = (1 / 11, 1 / 10, 1 / 5, 1 / 3, 1 / 9, 1 / 4, 1 / 2)


def toy_candidates():
    """Seven candidates of the four-user, two-antenna example."""
    intervals = [(0, 0), (1, 1), (2, 2), (3, 3), (0, 1), (1, 2), (2, 3)]
    return [CandidateGroup(a, b, 1.0 / c) for (a, b), c in zip(intervals, TOY_COSTS)]


def toy_frame():
    return FrameConfig(num_symbols=8, num_subframes=16, bandwidth=1000.0, frame_duration=1.0,
                       throughput_target=1e4, bandwidth_inefficiency=1.0)


@pytest.fixture
def default_config():
    return ExperimentConfig()


@pytest.fixture
def default_users(default_config):
    return build_population(default_config)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
