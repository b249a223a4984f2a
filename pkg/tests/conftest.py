import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def mamm():
    from frl.datasets import load_mammographic
    from frl.mining import build_rule_matrix, mine_rules

    data, binarizer = load_mammographic()
    universe = mine_rules(data, 0.05, 2)
    return data, universe, build_rule_matrix(data, universe), binarizer
