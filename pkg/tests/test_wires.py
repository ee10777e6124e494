import math

import numpy as np
import pytest

from conftest import tiny_solution, tiny_spec
from oracles import brute_force_assignment, mst_weight_enumeration, simple_cycles_min
from qtam.circuit import Net, PortRef
from qtam.router import route_all
from qtam.wires import (Bridge, ConfigurationError, DeviceConstants, NetFlow, NonConvergenceError,
                        ResidualEdge, assign_amplitudes, bridge_width, build_residual, cancel_negative_cycles,
                        effective_length_bound, effective_width, ensure_strong_connectivity, find_negative_cycle,
                        initial_amplitudes, refine_wires, net_supplies, phase_limited_width,
                        refine_net, strongly_connected, topology_arcs, wire_capacity)


def random_transport(rng, max_wires=9):
    while True:
        p, q = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        if p * q <= max_wires:
            break
    supplies = rng.integers(1, 4, p)
    total = int(supplies.sum())
    if total < q:
        supplies[0] += q - total
        total = q
    demands = np.ones(q, dtype=int)
    for _ in range(total - q):
        demands[rng.integers(q)] += 1
    lengths = rng.integers(0, 12, (p, q)).astype(float)
    return lengths, supplies.astype(float), demands.astype(float)


def test_effective_width_examples():
    assert effective_width(10, 5, 2) == 1
    assert effective_width(0) == 0
    assert effective_width(6, 2, 1) == 2 * effective_width(3, 2, 1)
    with pytest.raises(ValueError):
        effective_width(1, 0, 1)
    with pytest.raises(ValueError):
        effective_width(1, 1, -1)


def test_phase_limited_width_at_bound_equals_effective_width():
    psi, delta = 3.0, 1.5
    l_eff = effective_length_bound(psi, delta, r_0=2.0, chi_phi=4.0)
    assert phase_limited_width(psi, l_eff, r_0=2.0, chi_phi=4.0) == pytest.approx(delta)


def test_bridge_width_floor():
    assert bridge_width(0.01, DeviceConstants()) == 0.1
    assert bridge_width(2.0, DeviceConstants()) == 2.0


def test_single_wire_takes_everything():
    nf = assign_amplitudes([[7.0]], [2.0], [2.0])
    assert nf.flow.tolist() == [[2.0]]
    assert nf.area == 14


def test_unit_square_prefers_short_matching():
    # sources (0,0),(1,1); sinks (1,0),(0,1) vs the crossed pairing
    lengths = np.array([[1.0, 3.0], [3.0, 1.0]])
    nf = assign_amplitudes(lengths, [1, 1], [1, 1])
    assert nf.area == 2 == brute_force_assignment(lengths, [1, 1], [1, 1])
    nf = assign_amplitudes(lengths[:, ::-1], [1, 1], [1, 1])
    assert nf.area == 2


def test_imbalance_is_rejected():
    with pytest.raises(ConfigurationError):
        initial_amplitudes([[1.0, 2.0]], [3], [1, 1])
    with pytest.raises(ConfigurationError):
        initial_amplitudes([[1.0]], [-1], [-1])
    with pytest.raises(ValueError):
        initial_amplitudes([[1.0, 2.0]], [2], [2])


def test_northwest_corner_is_feasible():
    rng = np.random.default_rng(7)
    for _ in range(50):
        L, s, d = random_transport(rng)
        nf = initial_amplitudes(L, s, d)
        assert np.allclose(nf.flow.sum(axis=1), s)
        assert np.allclose(nf.flow.sum(axis=0), d)
        assert np.all(nf.flow >= 0)


def test_residual_construction():
    assert wire_capacity(3, 5) == 3
    nf = NetFlow(np.array([3.0]), np.array([5.0]), np.array([[1.5]]), np.array([[3.0]]))
    rn = build_residual(nf)
    fwd = [e for e in rn.edges if e.forward][0]
    back = [e for e in rn.edges if not e.forward][0]
    assert fwd.residual == 0 and fwd.length == 1.5
    assert back.residual == -3 and back.length == -1.5
    empty = NetFlow(np.array([1.0]), np.array([1.0]), np.array([[2.0]]), np.array([[0.0]]))
    assert [e.forward for e in build_residual(empty).edges] == [True]


def test_bellman_ford_three_cycle():
    edges = [ResidualEdge(0, 1, 1.0, 1.0, (0, 0), True),
             ResidualEdge(1, 2, 1.0, 1.0, (0, 1), True),
             ResidualEdge(2, 0, 1.0, -3.0, (1, 0), True)]
    cycle = find_negative_cycle(3, edges)
    assert cycle is not None
    assert sum(e.length for e in cycle) == pytest.approx(-1)
    assert simple_cycles_min(3, [(e.tail, e.head, e.length) for e in edges]) == -1
    assert {(e.tail, e.head) for e in cycle} == {(0, 1), (1, 2), (2, 0)}
    clean = [ResidualEdge(0, 1, 1.0, 1.0, (0, 0), True), ResidualEdge(1, 0, 1.0, -1.0, (0, 0), False)]
    assert find_negative_cycle(2, clean) is None
    # zero-capacity edges do not count
    assert find_negative_cycle(3, edges[:2] + [ResidualEdge(2, 0, 0.0, -3.0, (1, 0), True)]) is None


def test_one_augmentation_cleans_a_bad_start():
    lengths = np.array([[5.0, 1.0], [1.0, 5.0]])
    nf = initial_amplitudes(lengths, [1, 1], [1, 1])
    assert nf.area == 10
    rn = build_residual(nf)
    cyc = find_negative_cycle(rn.num_nodes, rn.edges)
    assert cyc is not None and sum(e.length for e in cyc) < 0
    arcs = [(e.tail, e.head, e.length) for e in rn.edges if e.capacity > 0]
    assert simple_cycles_min(rn.num_nodes, arcs) == pytest.approx(-8)
    out = cancel_negative_cycles(nf)
    assert out.area == 2
    rn = build_residual(out)
    assert find_negative_cycle(rn.num_nodes, rn.edges) is None


def test_no_negative_cycle_means_unchanged():
    nf = initial_amplitudes([[1.0, 3.0], [3.0, 1.0]], [1, 1], [1, 1])
    assert np.array_equal(cancel_negative_cycles(nf).flow, nf.flow)


def test_cycle_cap():
    nf = initial_amplitudes([[5.0, 1.0], [1.0, 5.0]], [1, 1], [1, 1])
    with pytest.raises(NonConvergenceError):
        cancel_negative_cycles(nf, max_rounds=0)


def test_matches_brute_force_and_never_increases_area():
    rng = np.random.default_rng(11)
    for _ in range(80):
        L, s, d = random_transport(rng)
        nf = initial_amplitudes(L, s, d)
        areas = [nf.area]
        cur = nf
        while True:
            rn = build_residual(cur)
            cyc = find_negative_cycle(rn.num_nodes, rn.edges)
            if cyc is None:
                break
            cur = _one_round(cur, cyc)
            areas.append(cur.area)
        assert all(b <= a + 1e-9 for a, b in zip(areas, areas[1:]))
        final = cancel_negative_cycles(nf)
        assert final.area == pytest.approx(brute_force_assignment(L, s, d), abs=1e-9)
        assert np.allclose(final.flow.sum(axis=1), s, atol=1e-9)
        assert np.allclose(final.flow.sum(axis=0), d, atol=1e-9)


def _one_round(nf, cycle):
    push = min(e.capacity for e in cycle)
    flow = nf.flow.copy()
    for e in cycle:
        i, j = e.wire
        flow[i, j] += push if e.forward else -push
    return NetFlow(nf.supplies, nf.demands, nf.lengths, flow, nf.device)


def test_strong_connectivity_helpers():
    assert strongly_connected(1, [])
    assert not strongly_connected(2, [(0, 1)])
    assert strongly_connected(2, [(0, 1), (1, 0)])


def test_already_connected_gets_no_bridges():
    nf = assign_amplitudes([[3.0]], [1], [1])
    assert ensure_strong_connectivity(nf, [(0, 0, 1), (3, 0, 1)], [(0,), (1,)]) == []


def test_kruskal_picks_shortest_candidate():
    # ports: 0 = source A, 1 = source B carrying no flow, 2 = sink fed by A.
    # Port distances: A-B 3, A-sink 4, B-sink 5.
    nf = NetFlow(np.array([1.0, 0.0]), np.array([1.0]), np.array([[4.0], [5.0]]),
                 np.array([[1.0], [0.0]]))
    positions = [(0, 0, 1), (0, 3, 1), (4, 0, 1)]
    bridges = ensure_strong_connectivity(nf, positions, [(0,), (1,), (2,)])
    assert len(bridges) == 1
    assert {bridges[0].a, bridges[0].b} == {0, 1}
    assert bridges[0].length == 3
    assert bridges[0].width == 0.1
    arcs = topology_arcs(nf, [(0,), (1,), (2,)], bridges)
    assert strongly_connected(3, arcs)


def test_kruskal_matches_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(3, 6))
        positions = [(int(rng.integers(0, 10)), int(rng.integers(0, 10)), 1) for _ in range(n)]
        nf = NetFlow(np.zeros(1), np.zeros(n - 1), np.zeros((1, n - 1)), np.zeros((1, n - 1)))
        subnets = [(i,) for i in range(n)]
        bridges = ensure_strong_connectivity(nf, positions, subnets)
        assert len(bridges) == n - 1
        cand = [(a, b, math.dist(positions[a], positions[b])) for a in range(n) for b in range(a + 1, n)]
        got = sum(math.dist(positions[b.a], positions[b.b]) for b in bridges)
        assert got == pytest.approx(mst_weight_enumeration(n, cand))
        assert strongly_connected(n, topology_arcs(nf, subnets, bridges))


def test_net_supplies_defaults():
    net = Net("n", (PortRef("g", 0), PortRef("g", 1)), (PortRef("h", 0), PortRef("h", 1), PortRef("h", 2)))
    s, d = net_supplies(net)
    assert d.tolist() == [1, 1, 1] and s.tolist() == [1.5, 1.5]
    net = Net("n", (PortRef("g", 0, amplitude=2.0), PortRef("g", 1)), (PortRef("h", 0, amplitude=3.0),))
    assert net_supplies(net)[0].tolist() == [2.0, 1.0]


def test_refine_net_with_subnets_connects_everything():
    net = Net("n", (PortRef("g", 0, amplitude=2.0),),
              (PortRef("h", 0, amplitude=1.0), PortRef("g", 1, amplitude=1.0)), subnets=((0, 2), (1,)))
    positions = [(0, 0, 1), (6, 0, 1), (0, 1, 1)]
    r = refine_net(net, positions)
    assert r.flow_area == pytest.approx(6 * 1 + 1 * 1)
    assert r.bridges == []
    assert r.area == r.flow_area


def test_pipeline_on_tiny_solution_is_idempotent():
    spec = tiny_spec()
    s = route_all(spec, tiny_solution(spec))
    a = refine_wires(spec, s)
    b = refine_wires(spec, s)
    assert a.widths() == b.widths()
    # (1,1,1) -> (4,4,2): 3 + 3 + one via at 2
    assert a.total_area == a.flow_area == 8
    assert isinstance(Bridge(0, 1, 2.0, 0.5).area, float)
