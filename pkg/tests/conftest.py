import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dualnehari.problem import arctan_reaction, constant_forcing, trig_forcing

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def g():
    return arctan_reaction()


@pytest.fixture(scope="session")
def p0():
    return constant_forcing(0.0)


@pytest.fixture(scope="session")
def p03():
    return constant_forcing(0.3)


@pytest.fixture(scope="session")
def pcos():
    return trig_forcing(0.3, [(1.0, 0.5, 0.0)], period=2 * math.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report: one PASS/FAIL line each, repeated in the terminal summary
_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    lines = request.config.stash[_ACCEPTANCE]

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
