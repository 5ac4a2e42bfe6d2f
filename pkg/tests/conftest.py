import numpy as np
import pytest

from alphaduplex.geometry import Deployment, Rect, Topology

# (criterion, passed, detail) rows collected by test_acceptance.py
ACCEPTANCE_LOG = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_LOG:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def two_cell():
    """BSs at (0,0) and (500,0) with users at (100,0) and (400,0)."""
    topo = Topology(np.array([[0.0, 0.0], [500.0, 0.0]]), Rect())
    dep = Deployment(np.array([[100.0, 0.0], [400.0, 0.0]]), np.array([0, 1]), np.array([0, 1]))
    return topo, dep
