import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))  # for the brute-force helpers in oracles.py

from octerm.model import builtin_example  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def fig2():
    return builtin_example("fig2")


@pytest.fixture(scope="session")
def fig2_no_st():
    return builtin_example("fig2-no-st")


@pytest.fixture(scope="session")
def biased():
    return builtin_example("biased-walk")


@pytest.fixture(scope="session")
def idle():
    return builtin_example("idle-loop")
