# Shared fixtures: vote scale, hand-built tables and a small seeded synthetic table with a config
# sized for it.
import pytest

from services.config import ExperimentConfig
from services.dataset import RatingsTable, VoteScale, generate_synthetic
from services.immune_core import AisParams


@pytest.fixture
def scale() -> VoteScale:
    return VoteScale(min_vote=0, max_vote=5, step=1)


@pytest.fixture
def tiny_table(scale) -> RatingsTable:
    """
    User 1 is the target. 2 and 3 vote exactly like it, 4 votes the reverse, 5 is constant and
    6 shares a single item with it.
    """
    base = {1: 1, 2: 2, 3: 3, 4: 4, 5: 5, 6: 5}
    return RatingsTable(
        scale,
        {
            1: dict(base),
            2: {**base, 7: 4},
            3: {**base, 8: 0},
            4: {i: 5 - v for i, v in base.items()},
            5: {i: 3 for i in base},
            6: {1: 4, 9: 2},
        },
    )


@pytest.fixture(scope="session")
def synthetic_table() -> RatingsTable:
    return generate_synthetic(60, 40, 3, 0.5, 0.5, VoteScale(), seed=7)


@pytest.fixture(scope="session")
def small_config() -> ExperimentConfig:
    return ExperimentConfig(
        ais_params=AisParams(capacity=10, stability_window=5),
        sp_n=10,
        overlap_threshold=10,
        n_trials=6,
        min_target_votes=10,
        master_seed=3,
    )
