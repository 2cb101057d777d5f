import warnings

import numpy as np
import pytest

from tailcte import HeavyTailModel, make_sorted, sample


@pytest.fixture(scope="session")
def frechet15():
    return HeavyTailModel.frechet(1.5)


@pytest.fixture(scope="session")
def frechet175():
    return HeavyTailModel.frechet(1.75)


@pytest.fixture(scope="session")
def pareto15():
    return HeavyTailModel.pareto(1.5)


@pytest.fixture(scope="session")
def burr15():
    return HeavyTailModel.burr(1.5, 1.0)


@pytest.fixture(scope="session")
def frechet_sample(frechet15):
    return sample(frechet15, 2000, seed=12345)


@pytest.fixture
def one_to_ten():
    return make_sorted(np.arange(1.0, 11.0))


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


# ---------------------------------------------------------------------------
# acceptance summary: tests in test_acceptance.py record one line per criterion
# ---------------------------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
