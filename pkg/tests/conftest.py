import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qtam.circuit import (CircuitSpec, GateSpec, Net, Placement, Port, PortRef, ProblemGraph, QaoaParams,
                          Solution)

DATA = Path(__file__).resolve().parent.parent / "data"

# criterion number -> list of (description, passed)
ACCEPTANCE: dict[int, list[tuple[str, bool]]] = {}


def tiny_spec() -> CircuitSpec:
    """2 gates, 1 net, single-edge problem, 2 layers."""
    g0 = GateSpec("g0", 2, 2, (Port(0, 0), Port(1, 1)), rounds=(1,))
    g1 = GateSpec("g1", 2, 2, (Port(0, 0), Port(1, 1)), rounds=(2,))
    net = Net("n0", (PortRef("g0", 1, 1),), (PortRef("g1", 0, 2),), problem_edge=(0, 1))
    return CircuitSpec((g0, g1), (net,), 2, (8, 8), ProblemGraph(2, ((0, 1),)))


def tiny_solution(spec=None, gamma=0.3, mu=0.2) -> Solution:
    spec = spec or tiny_spec()
    return Solution(((Placement(0, 0, 0, 1),), (Placement(4, 4, 0, 2),)), (None,),
                    QaoaParams(((gamma,),), ((mu, mu),)), 2, 1, 2)


@pytest.fixture
def tiny():
    return tiny_spec()


@pytest.fixture
def tiny_sol(tiny):
    return tiny_solution(tiny)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[n]
        ok = all(p for _, p in checks)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}")
        for desc, p in checks:
            terminalreporter.write_line(f"    [{'ok' if p else 'FAIL'}] {desc}")
