import numpy as np
import pytest
from hypothesis import settings

from dgparticle.scenarios import ScenarioConfig, build_setup

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

# lines appended by tests/test_acceptance.py, echoed once at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def setup_for(scenario, **overrides):
    return build_setup(ScenarioConfig.for_scenario(scenario, **overrides))


@pytest.fixture(scope="session")
def heat60():
    return setup_for("heat", cells_per_dim=60)


@pytest.fixture(scope="session")
def heat40():
    return setup_for("heat", cells_per_dim=40)


@pytest.fixture(scope="session")
def porous40():
    return setup_for("porous_medium", cells_per_dim=40)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
