import numpy as np
import pytest

from wmnmf.core import HyperParams, validate_dataset

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_dataset(rng, n_views=2, n_obs=12, n_features=(6, 8)):
    views = [rng.random((m, n_obs)) + 0.05 for m in n_features[:n_views]]
    return validate_dataset(views)


def low_rank_dataset(rng, n_obs=30, k=2, n_features=(8, 10)):
    V0 = rng.random((n_obs, k)) + 0.1
    views = [(rng.random((m, k)) + 0.1) @ V0.T for m in n_features]
    return validate_dataset(views)


@pytest.fixture
def small_hp():
    return HyperParams(k=2, outer_max=20)
