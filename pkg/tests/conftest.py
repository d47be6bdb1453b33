import numpy as np
import pytest
from hypothesis import settings

from qsfarm.turbine import load_turbine

settings.register_profile("ci", max_examples=60, deadline=None, derandomize=True)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def turbine():
    return load_turbine()


@pytest.fixture(scope="session")
def diameter(turbine):
    return turbine.rotor_diameter


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
