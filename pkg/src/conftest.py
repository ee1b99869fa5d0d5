import os

import hypothesis
import numpy as np
import pytest

from subspace_designs.matgroup import gamma_l1, hyperplane_levi

hypothesis.settings.register_profile("default", max_examples=100, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=2000, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))

RUN_SLOW = os.getenv("QDESIGN_RUN_SLOW") == "1"
RUN_LEMMA_3_5 = os.getenv("QDESIGN_RUN_LEMMA_3_5") == "1"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long computations, run with QDESIGN_RUN_SLOW=1")
    config.addinivalue_line("markers", "lemma_3_5: the full 11-dimensional search, run with QDESIGN_RUN_LEMMA_3_5=1")


def pytest_collection_modifyitems(config, items):
    skip_slow = pytest.mark.skip(reason="set QDESIGN_RUN_SLOW=1 to run")
    skip_full = pytest.mark.skip(reason="set QDESIGN_RUN_LEMMA_3_5=1 to run")
    for item in items:
        if "lemma_3_5" in item.keywords and not RUN_LEMMA_3_5:
            item.add_marker(skip_full)
        elif "slow" in item.keywords and not RUN_SLOW:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def gamma_2_7():
    return gamma_l1(2, 7)


@pytest.fixture(scope="session")
def levi_6_2():
    return hyperplane_levi(6, 2)

