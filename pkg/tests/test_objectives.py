import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import tiny_solution, tiny_spec
from oracles import cut_values, oracle_state
from qtam.circuit import CircuitSpec, GateSpec, Placement, Port, ProblemGraph, QaoaParams, Solution
from qtam.objectives import (ContractViolation, EvalConfig, RangeTracker, UnroutedNetError, active_problem,
                             area_f1, circuit_distribution, closeness_violation, evaluate, f4_input_size,
                             f5_measurements, measurement_violations, refined_wire_area, scalarized_cost,
                             symmetry_constraint_vector, symmetry_violations, violation_sums, wire_area_f2)


def one_gate_spec(w, h, rounds=(1,), layers=1, symmetry="free", partner=None, extra=()):
    gates = (GateSpec("a", w, h, (Port(0, 0),), rounds, symmetry, partner),) + tuple(extra)
    return CircuitSpec(gates, (), layers, (20, 20), ProblemGraph(1, ()))


def solution(placements):
    return Solution(tuple(tuple(p) for p in placements), (), QaoaParams(), 1)


def test_area_examples():
    spec = one_gate_spec(2, 3)
    assert area_f1(spec, solution([[Placement(4, 4, 0, 1)]])) == 3
    # two gates reaching from y=0 to y=4 on two layers
    b = GateSpec("b", 1, 2, (Port(0, 0),), (2,))
    spec = one_gate_spec(2, 3, layers=2, extra=(b,))
    assert area_f1(spec, solution([[Placement(0, 0, 0, 1)], [Placement(5, 3, 0, 2)]])) == 10
    empty = CircuitSpec((), (), 1, (4, 4), ProblemGraph(1, ()))
    assert area_f1(empty, solution([])) == 0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10), st.integers(0, 10))
def test_area_translation_invariant(dx, dy):
    b = GateSpec("b", 1, 2, (Port(0, 0),), (2,))
    spec = one_gate_spec(2, 3, layers=2, extra=(b,))
    base = [[Placement(0, 0, 0, 1)], [Placement(5, 3, 1, 2)]]
    moved = [[replace(p, x=p.x + dx, y=p.y + dy) for p in row] for row in base]
    assert area_f1(spec, solution(base)) == area_f1(spec, solution(moved))


def test_symmetry_examples():
    a = GateSpec("a", 2, 1, (Port(0, 0),), symmetry="pair", partner="b")
    b = GateSpec("b", 2, 1, (Port(0, 0),), symmetry="pair", partner="a")
    c = GateSpec("c", 2, 2, (Port(0, 0),), symmetry="self")
    spec = CircuitSpec((a, b, c), (), 1, (10, 10), ProblemGraph(1, ()), symmetry_axis=5)
    mirrored = solution([[Placement(1, 2)], [Placement(7, 2)], [Placement(4, 6)]])
    assert symmetry_violations(spec, mirrored) == [0, 0]
    shifted = solution([[Placement(1, 2)], [Placement(7, 4)], [Placement(4, 6)]])
    assert symmetry_violations(spec, shifted) == [-2, 0]
    off = solution([[Placement(1, 2)], [Placement(7, 2)], [Placement(2, 6)]])
    assert symmetry_violations(spec, off) == [0, -2]
    vec = symmetry_constraint_vector(spec, mirrored)
    assert len(vec) == 3 * 2 + 2 * 1
    assert vec[-2:] == [6.0, 0.0]


def test_wire_area_examples():
    assert wire_area_f2([(7, 1)]) == 7
    assert wire_area_f2([(7, 1), (3, 2)]) == 13
    assert wire_area_f2([(7, 0.5)]) == 3.5


def test_wire_area_additive_over_nets():
    from qtam.circuit import Net, PortRef
    from qtam.router import route_all
    spec = tiny_spec()
    second = Net("n1", (PortRef("g0", 0, 1),), (PortRef("g1", 1, 2),))
    both = replace(spec, nets=spec.nets + (second,))
    s = tiny_solution(spec)
    s_both = route_all(both, replace(s, routes=(None, None)))
    only1 = refined_wire_area(spec, route_all(spec, s))[0]
    only2 = refined_wire_area(replace(spec, nets=(second,)), route_all(replace(spec, nets=(second,)), s))[0]
    assert refined_wire_area(both, s_both)[0] == pytest.approx(only1 + only2)


def test_unrouted_net_signalled():
    spec = tiny_spec()
    with pytest.raises(UnroutedNetError):
        refined_wire_area(spec, tiny_solution(spec))


def test_f4_f5_examples():
    s = Solution((), (), QaoaParams(), 4, 3, 2)
    assert f4_input_size(s) == 4
    assert f5_measurements(s) == 6
    assert f5_measurements(replace(s, measurement_rounds=0)) == 0


def test_scalarized_examples():
    f = (3, 13, -0.5, 4, 6)
    assert scalarized_cost(f, [0] * 5) == 0
    assert scalarized_cost(f, [1] * 5) == 25.5
    assert scalarized_cost(f, [1] * 5, [(0.5, 2)]) == 26.5
    with pytest.raises(ValueError):
        scalarized_cost(f, [1] * 4)


def test_violation_sum_examples():
    assert violation_sums([0, 0], [0]) == (0, 0)
    assert violation_sums([-1, -2], [])[0] == -3
    assert violation_sums([], [-0.2])[1] == -0.2
    with pytest.raises(ContractViolation):
        violation_sums([0.5], [])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 0, allow_nan=False), max_size=6), st.floats(-5, -1e-6, allow_nan=False))
def test_violation_sum_monotone(values, extra):
    assert violation_sums(values + [extra], [])[0] < violation_sums(values, [])[0]


def test_measurement_violations():
    s = Solution((), (), QaoaParams(), 3, 0, 1)
    assert measurement_violations(s) == [-1, -2]
    assert measurement_violations(replace(s, measurement_rounds=2, measurement_gates=3)) == [0, 0]


def test_closeness_violation_threshold():
    assert closeness_violation([0.5, 0.5], [0.5, 0.5]) == 0
    d = 1.0  # D((1,0) || (1/2,1/2))
    assert closeness_violation([1, 0], [0.5, 0.5], epsilon=0.05) == pytest.approx(-(d - 0.05))


def test_range_tracker():
    r = RangeTracker()
    assert r.ranges().tolist() == [1] * 5
    r.update([1, 2, 3, 4, 5])
    r.update([3, 2, 0, 4, 9])
    assert r.ranges().tolist() == [2, 1, 3, 1, 4]


def test_inactive_qubits_read_zero():
    pg = ProblemGraph(3, ((0, 1), (1, 2)))
    params = QaoaParams(((0.4, 0.9),), ((0.3, 0.5, 0.7),))
    sub, sub_params = active_problem(pg, params, 2)
    assert sub.edges == ((0, 1),) and sub_params.mus == ((0.3, 0.5),)
    q = circuit_distribution(pg, params, 2)
    assert q.shape == (8,) and q[4:].sum() == 0
    ref = np.abs(oracle_state(2, [(0, 1)], [[0.4]], [[0.3, 0.5]])) ** 2
    assert np.allclose(q[:4], ref)


def test_f3_is_negated_expectation():
    spec = tiny_spec()
    s = tiny_solution(spec, gamma=0.7, mu=0.3)
    e = evaluate(spec, s)
    ref = float(np.abs(oracle_state(2, [(0, 1)], [[0.7]], [[0.3, 0.3]])) ** 2 @ cut_values(2, [(0, 1)]))
    assert e.f[2] == pytest.approx(-ref, abs=1e-12)
    assert e.f[2] == -e.expectation
    assert e.g_s == 0 and e.c_s == 0 and e.feasible
    assert e.solution.routes[0] is not None
    assert len(e.f) == 5 and np.all(np.isfinite(e.f))


def test_reference_distribution_drives_closeness():
    spec = replace(tiny_spec(), reference_distribution=(0.0, 0.5, 0.5, 0.0))
    far = evaluate(spec, tiny_solution(spec, gamma=0.0, mu=0.0))
    near = evaluate(spec, tiny_solution(spec, gamma=math.pi / 4, mu=math.pi / 8))
    assert far.c_s < 0
    assert near.c_s == 0
    assert evaluate(spec, tiny_solution(spec), EvalConfig(epsilon=100)).c_s == 0
