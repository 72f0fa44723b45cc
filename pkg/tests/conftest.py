import numpy as np
import pytest

from elastobayes.config import SimulationConfig, transducer_line


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow (hours-long) tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="slow; enable with --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def tiny_config(**kw):
    """4 x 3 domain with a coarse mesh; forward solves take a fraction of a second."""
    base = dict(
        x_max=4.0, y_min=-3.0, depth_H=3.0, dx=0.2, dt=0.02, kappa=0.5, tau_in=1.0, record_step=0.08,
        emitters=transducer_line(0.5, 3.5, 0.5), receivers=transducer_line(0.5, 3.5, 0.5),
    )
    base.update(kw)
    return SimulationConfig(**base)


@pytest.fixture
def tiny():
    return tiny_config()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


VERDICTS = []


def record_verdict(number, ok, detail):
    """Store one acceptance line; all lines are printed in the terminal summary."""
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS.append(line)
    print(line, flush=True)
    return ok


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
