import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mcdyn.machine import Arch, Bounds, Transfer, init_machine

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


def small_machine(arch=Arch.DELAYED_SCALAR, M=6, N=8, f=Transfer.GAUSSIAN_EXP, seed=0,
                  bounds=Bounds(0.5, 0.5, 1.0, 2.0), tau=0.01, include_current=False):
    return init_machine(arch, M, N, tau, bounds, f, seed=seed, include_current=include_current)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE: list[str] = []


def report(config, line: str) -> None:
    ACCEPTANCE.append(line)
    tr = config.pluginmanager.getplugin("terminalreporter")
    if tr is not None:
        tr.write_line("")
        tr.write_line(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
