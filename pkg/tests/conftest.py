import numpy as np
import pytest

from dtmcast import build_scenario, load_config
from dtmcast.config import AppConfig, parse_config


@pytest.fixture(scope="session")
def default_config() -> AppConfig:
    return load_config(None)


@pytest.fixture(scope="session")
def desk_scenario(default_config):
    """The default desk-scale world: G=3, 5 users/group, 1000 videos."""
    return build_scenario(default_config)


@pytest.fixture(scope="session")
def small_scenario():
    """A cheap scenario for training-loop tests."""
    cfg = parse_config({
        "seed": 7,
        "scenario": {"group_count": 2, "users_per_group": 3,
                     "catalog_size": 60, "recommended_len": 12},
    })
    return build_scenario(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
