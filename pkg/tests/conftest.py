import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from crpnet.examples import net_a, net_b
from crpnet.network import DETERMINISTIC
from crpnet.planner import make_static_plan

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def netb():
    return net_b()


@pytest.fixture(scope="session")
def planb(netb):
    return make_static_plan(netb)


@pytest.fixture(scope="session")
def neta():
    return net_a()


@pytest.fixture(scope="session")
def plana(neta):
    return make_static_plan(neta)


@pytest.fixture(scope="session")
def neta_det():
    return net_a(DETERMINISTIC)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.acceptance_lines = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
