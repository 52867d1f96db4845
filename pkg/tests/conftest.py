import numpy as np
import pytest

from stepwalk.presets import FIG3_THETA_PI, FIG4_THETA_PI, ring_config, strip_config

PI = np.pi


@pytest.fixture
def fig3_strip():
    return strip_config(FIG3_THETA_PI)


@pytest.fixture
def fig4_strip():
    return strip_config(FIG4_THETA_PI)


@pytest.fixture
def fig3_ring():
    return ring_config(FIG3_THETA_PI)


@pytest.fixture
def fig4_ring():
    return ring_config(FIG4_THETA_PI)


def pytest_terminal_summary(terminalreporter):
    reports = [r for r in terminalreporter.getreports("passed") + terminalreporter.getreports("failed")
               if "test_acceptance.py" in r.nodeid and r.when == "call"]
    if not reports:
        return
    terminalreporter.section("acceptance criteria")
    for r in sorted(reports, key=lambda r: r.nodeid):
        name = r.nodeid.split("::")[-1]
        terminalreporter.write_line(f"{'PASS' if r.passed else 'FAIL'}  {name}")
