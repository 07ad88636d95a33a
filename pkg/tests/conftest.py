import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from horizon.surfaces import make_surface, sample_grid

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))


@pytest.fixture(scope="session")
def grapefruit():
    return make_surface({"kind": "rotational_cover"})


@pytest.fixture(scope="session")
def plane_grid():
    return sample_grid({"kind": "flat_plane"}, (0.1, 0.1), ((-3.0, 3.0), (-3.0, 3.0)), 16)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
