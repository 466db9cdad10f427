"""
Shared fixtures and the --runslow switch
"""

import numpy as np
import pytest

from efdm import EfdmDataset
from helpers import make_dataset


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_dataset() -> EfdmDataset:
    return make_dataset(per_class=12, seed=7)
