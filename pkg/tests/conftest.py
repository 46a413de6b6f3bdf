import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from advedit.trees import Tree

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def tree_strategy(alphabet="abc", max_leaves=6):
    labels = st.sampled_from(list(alphabet))
    return st.recursive(
        labels.map(Tree),
        lambda kids: st.builds(Tree, labels, st.lists(kids, min_size=1, max_size=3)),
        max_leaves=max_leaves,
    )


trees = tree_strategy()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
