import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def coin():
    from statcoupling import Source

    return Source.iid([-1, 1], [0.5, 0.5])


@pytest.fixture
def chain():
    from statcoupling import Source

    return Source.markov([-1, 1], [[0.9, 0.1], [0.2, 0.8]])


@pytest.fixture
def eps_code():
    from statcoupling.equivariant import Quadratic, build_code

    return build_code(Quadratic.cross_term(0.25))
