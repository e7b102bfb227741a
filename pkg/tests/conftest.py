import numpy as np
import pytest

from tomoproj.topology import build_router_routing, build_tree_routing, four_leaf_tree, two_leaf_tree


@pytest.fixture
def two_leaf():
    return build_tree_routing(two_leaf_tree())


@pytest.fixture
def four_leaf():
    return build_tree_routing(four_leaf_tree())


@pytest.fixture
def router():
    return build_router_routing(4, 4, drop_last_row=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
