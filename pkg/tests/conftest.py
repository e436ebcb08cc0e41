import math

import numpy as np
import pytest

from bergschatten.tree import build_tree

LN2 = math.log(2.0)


@pytest.fixture(scope="session")
def dyadic_tree():
    """n = 1, lambda = ln2/2, depth 8."""
    return build_tree(LN2 / 2, 8, n=1, mode="dyadic")


@pytest.fixture(scope="session")
def net_tree():
    """n = 2, lambda = ln2/2, depth 3: small enough for unit tests."""
    return build_tree(LN2 / 2, 3, n=2, mode="net", seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
