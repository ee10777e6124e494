"""Wire width refinement.

Each net is treated as a transportation problem. Source ports supply
amplitude, sink ports demand it, and every source/sink pair is a candidate
wire whose area grows linearly with the amplitude it carries
(``length * psi / (j_max * h_nom)``). The pipeline runs in four steps:

1. start from a feasible assignment (north-west corner rule);
2. build the residual network: forward edges can take more amplitude,
   backward edges can give some back at negated cost;
3. cancel negative cycles found by Bellman-Ford until none remain, which
   leaves the minimum-area assignment;
4. bridge the net's disconnected pieces with a Kruskal spanning tree over
   the inter-subnet port pairs, weighted by Euclidean distance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .circuit import CircuitSpec, Net, Solution, Vertex, port_position
from .router import DEFAULT_VIA_COST, wire_length

TOL = 1e-12


class ConfigurationError(ValueError):
    pass


class NonConvergenceError(RuntimeError):
    pass


class ConnectivityError(RuntimeError):
    pass


@dataclass(frozen=True)
class DeviceConstants:
    j_max: float = 1.0
    h_nom: float = 1.0
    r_0: float = 1.0
    chi_phi: float = 1.0
    delta_0: float = 0.1
    t_ref: str = "T_ref"


def effective_width(psi: float, j_max: float = 1.0, h_nom: float = 1.0) -> float:
    if j_max <= 0 or h_nom <= 0:
        raise ValueError(f"j_max and h_nom must be positive (got {j_max}, {h_nom})")
    return abs(psi) / (j_max * h_nom)


def effective_length_bound(psi: float, delta: float, r_0: float = 1.0, chi_phi: float = 1.0) -> float:
    """Longest wire whose phase drop stays within ``chi_phi``."""
    if psi == 0:
        return math.inf
    return chi_phi * delta / (abs(psi) * r_0)


def phase_limited_width(psi: float, l_eff: float, r_0: float = 1.0, chi_phi: float = 1.0) -> float:
    if psi == 0:
        return 0.0
    return abs(psi) * l_eff * r_0 / chi_phi


def bridge_width(psi: float, device: DeviceConstants) -> float:
    """Width given to a spanning-tree wire: never below the manufacturable minimum."""
    delta = effective_width(psi, device.j_max, device.h_nom)
    l_eff = effective_length_bound(psi, delta, device.r_0, device.chi_phi)
    delta_p = phase_limited_width(psi, l_eff, device.r_0, device.chi_phi)
    return max(delta, delta_p, device.delta_0)


def wire_capacity(psi_i: float, psi_j: float) -> float:
    """Largest amplitude a wire between two ports can carry: the smaller port magnitude."""
    return min(abs(psi_i), abs(psi_j))


@dataclass
class NetFlow:
    """Amplitude assignment for one net. Rows are sources, columns sinks."""

    supplies: np.ndarray
    demands: np.ndarray
    lengths: np.ndarray
    flow: np.ndarray
    device: DeviceConstants = field(default_factory=DeviceConstants)

    @property
    def unit_area(self) -> np.ndarray:
        """Wire area per unit amplitude on each source/sink wire."""
        return self.lengths / (self.device.j_max * self.device.h_nom)

    @property
    def capacity(self) -> np.ndarray:
        return np.minimum.outer(np.abs(self.supplies), np.abs(self.demands))

    @property
    def widths(self) -> np.ndarray:
        return np.abs(self.flow) / (self.device.j_max * self.device.h_nom)

    @property
    def area(self) -> float:
        return float(np.sum(self.lengths * self.widths))


def _balanced(supplies: np.ndarray, demands: np.ndarray) -> None:
    if np.any(supplies < 0) or np.any(demands < 0):
        raise ConfigurationError("port amplitudes must be non-negative")
    if not math.isclose(supplies.sum(), demands.sum(), rel_tol=1e-9, abs_tol=1e-12):
        raise ConfigurationError(f"supply {supplies.sum()} != demand {demands.sum()}")


def initial_amplitudes(lengths, supplies, demands, device: DeviceConstants = DeviceConstants()) -> NetFlow:
    """Feasible start by the north-west corner rule."""
    supplies = np.asarray(supplies, dtype=float)
    demands = np.asarray(demands, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    _balanced(supplies, demands)
    if lengths.shape != (len(supplies), len(demands)):
        raise ValueError(f"length matrix {lengths.shape} does not match {len(supplies)}x{len(demands)} ports")
    flow = np.zeros_like(lengths)
    s, d = supplies.copy(), demands.copy()
    i = j = 0
    while i < len(s) and j < len(d):
        amount = min(s[i], d[j])
        flow[i, j] = amount
        s[i] -= amount
        d[j] -= amount
        if s[i] <= TOL and i < len(s) - 1:
            i += 1
        elif d[j] <= TOL:
            j += 1
        else:
            i += 1
    return NetFlow(supplies, demands, lengths, flow, device)


@dataclass(frozen=True)
class ResidualEdge:
    tail: int
    head: int
    residual: float  # forward: spare amplitude; backward: -(amplitude that can be withdrawn)
    length: float
    wire: tuple[int, int]
    forward: bool

    @property
    def capacity(self) -> float:
        return abs(self.residual)


@dataclass(frozen=True)
class ResidualNetwork:
    """Nodes ``0..p-1`` are sources, ``p..p+q-1`` sinks."""

    num_nodes: int
    edges: tuple[ResidualEdge, ...]


def build_residual(nf: NetFlow) -> ResidualNetwork:
    p, q = nf.flow.shape
    cap = nf.capacity
    unit = nf.unit_area
    edges = []
    for i in range(p):
        for j in range(q):
            psi = nf.flow[i, j]
            edges.append(ResidualEdge(i, p + j, cap[i, j] - psi, unit[i, j], (i, j), True))
            if psi > TOL:
                edges.append(ResidualEdge(p + j, i, -psi, -unit[i, j], (i, j), False))
    return ResidualNetwork(p + q, tuple(edges))


def find_negative_cycle(num_nodes: int, edges: Sequence[ResidualEdge]) -> Optional[list[ResidualEdge]]:
    """Bellman-Ford from a virtual root joined to every node at zero cost.

    Only edges with positive capacity take part. Returns the edges of one
    negative cycle in traversal order, or ``None``.
    """
    usable = [e for e in edges if e.capacity > TOL]
    dist = [0.0] * num_nodes
    pred: list[Optional[ResidualEdge]] = [None] * num_nodes
    last = None
    for _ in range(num_nodes):
        last = None
        for e in usable:
            if dist[e.tail] + e.length < dist[e.head] - TOL:
                dist[e.head] = dist[e.tail] + e.length
                pred[e.head] = e
                last = e.head
        if last is None:
            return None
    # walk back far enough to land inside the cycle
    v = last
    for _ in range(num_nodes):
        v = pred[v].tail
    cycle = []
    u = v
    while True:
        e = pred[u]
        cycle.append(e)
        u = e.tail
        if u == v:
            break
    cycle.reverse()
    return cycle


def cancel_negative_cycles(nf: NetFlow, max_rounds: Optional[int] = None) -> NetFlow:
    """Push the bottleneck amplitude around negative cycles until none remain."""
    p, q = nf.flow.shape
    if max_rounds is None:
        max_rounds = 10 * (2 * p * q) ** 2
    flow = nf.flow.copy()
    current = replace(nf, flow=flow)
    for _ in range(max_rounds):
        rn = build_residual(current)
        cycle = find_negative_cycle(rn.num_nodes, rn.edges)
        if cycle is None:
            return current
        push = min(e.capacity for e in cycle)
        flow = current.flow.copy()
        for e in cycle:
            i, j = e.wire
            flow[i, j] += push if e.forward else -push
        flow[np.abs(flow) < TOL] = 0.0
        current = replace(current, flow=flow)
    raise NonConvergenceError(f"negative cycles remain after {max_rounds} rounds")


def assign_amplitudes(lengths, supplies, demands, device: DeviceConstants = DeviceConstants()) -> NetFlow:
    """Minimum-area amplitude assignment for one net."""
    return cancel_negative_cycles(initial_amplitudes(lengths, supplies, demands, device))


@dataclass(frozen=True)
class Bridge:
    a: int  # port indices within the net (sources first)
    b: int
    length: float
    width: float

    @property
    def area(self) -> float:
        return self.length * self.width


def _union_find(n: int):
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int) -> bool:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[max(ra, rb)] = min(ra, rb)
        return True

    return find, union


def strongly_connected(num_nodes: int, arcs: Sequence[tuple[int, int]]) -> bool:
    if num_nodes <= 1:
        return True
    if not arcs:
        return False
    rows, cols = zip(*arcs)
    graph = csr_matrix((np.ones(len(arcs)), (rows, cols)), shape=(num_nodes, num_nodes))
    n_comp, _ = connected_components(graph, directed=True, connection="strong")
    return n_comp == 1


def topology_arcs(nf: NetFlow, subnets: Sequence[Sequence[int]], bridges: Sequence[Bridge]) -> list[tuple[int, int]]:
    """Directed arcs of a net's map; every wire conducts both ways."""
    p = len(nf.supplies)
    pairs = [(i, p + j) for i, j in zip(*np.nonzero(nf.flow > TOL))]
    for sub in subnets:
        pairs.extend((a, b) for a, b in zip(sub, sub[1:]))
    pairs.extend((br.a, br.b) for br in bridges)
    return [(int(a), int(b)) for a, b in pairs] + [(int(b), int(a)) for a, b in pairs]


def ensure_strong_connectivity(nf: NetFlow, positions: Sequence[Vertex], subnets: Sequence[Sequence[int]],
                               f_l: float = DEFAULT_VIA_COST) -> list[Bridge]:
    """Bridging wires that make the net's map strongly connected.

    Ports in one subnet are already joined at zero width. Candidate bridges
    are all port pairs from different subnets, weighted by Euclidean distance;
    Kruskal picks the cheapest that join still-separate pieces. Each bridge
    gets at least the manufacturable minimum width.
    """
    n = len(positions)
    p = len(nf.supplies)
    bridges: list[Bridge] = []
    subnet_of = {}
    for s_idx, sub in enumerate(subnets):
        for port in sub:
            subnet_of[port] = s_idx
    while not strongly_connected(n, topology_arcs(nf, subnets, bridges)):
        find, union = _union_find(n)
        for a, b in topology_arcs(nf, subnets, bridges):
            union(a, b)
        candidates = []
        for a in range(n):
            for b in range(a + 1, n):
                if subnet_of[a] != subnet_of[b] and find(a) != find(b):
                    candidates.append((math.dist(positions[a], positions[b]), a, b))
        if not candidates:
            raise ConnectivityError("no candidate wire joins the remaining pieces")
        candidates.sort()
        added = 0
        for _, a, b in candidates:
            if union(a, b):
                psi = 0.0
                if a < p <= b:
                    psi = nf.flow[a, b - p]
                bridges.append(Bridge(a, b, wire_length(positions[a], positions[b], f_l), bridge_width(psi, nf.device)))
                added += 1
        if not added:
            raise ConnectivityError("spanning tree added no wires")
    return bridges


def net_supplies(net: Net) -> tuple[np.ndarray, np.ndarray]:
    """Port amplitudes; unspecified sinks demand 1 and unspecified sources share the rest."""
    demands = np.array([1.0 if r.amplitude is None else r.amplitude for r in net.sinks])
    given = [r.amplitude for r in net.sources]
    if all(a is None for a in given):
        supplies = np.full(len(given), demands.sum() / len(given))
    elif any(a is None for a in given):
        known = sum(a for a in given if a is not None)
        missing = sum(a is None for a in given)
        share = (demands.sum() - known) / missing
        supplies = np.array([share if a is None else a for a in given])
    else:
        supplies = np.array(given, dtype=float)
    return supplies, demands


@dataclass
class NetRefinement:
    net: str
    flow: NetFlow
    bridges: list[Bridge]
    positions: list[Vertex]

    @property
    def flow_area(self) -> float:
        return self.flow.area

    @property
    def bridge_area(self) -> float:
        return sum(b.area for b in self.bridges)

    @property
    def area(self) -> float:
        return self.flow_area + self.bridge_area

    def wires(self) -> list[tuple[float, float]]:
        """(length, width) for every wire with non-zero width."""
        out = [(float(l), float(w)) for l, w in zip(self.flow.lengths.ravel(), self.flow.widths.ravel()) if w > 0]
        out.extend((b.length, b.width) for b in self.bridges)
        return out


@dataclass
class WireRefinement:
    nets: list[NetRefinement]

    @property
    def flow_area(self) -> float:
        return sum(n.flow_area for n in self.nets)

    @property
    def total_area(self) -> float:
        return sum(n.area for n in self.nets)

    def widths(self) -> dict[tuple[str, int, int], float]:
        """Width per (net, source index, sink index) plus bridges keyed by port indices."""
        out = {}
        for n in self.nets:
            p = len(n.flow.supplies)
            for (i, j), w in np.ndenumerate(n.flow.widths):
                if w > 0:
                    out[(n.net, i, p + j)] = float(w)
            for b in n.bridges:
                out[(n.net, b.a, b.b)] = b.width
        return out


def refine_net(net: Net, positions: Sequence[Vertex], device: DeviceConstants = DeviceConstants(),
               f_l: float = DEFAULT_VIA_COST) -> NetRefinement:
    p = len(net.sources)
    supplies, demands = net_supplies(net)
    lengths = np.array([[wire_length(positions[i], positions[p + j], f_l) for j in range(len(net.sinks))]
                        for i in range(p)])
    nf = initial_amplitudes(lengths, supplies, demands, device)
    nf = cancel_negative_cycles(nf)
    bridges = ensure_strong_connectivity(nf, positions, net.subnet_partition(), f_l)
    return NetRefinement(net.id, nf, bridges, list(positions))


def refine_wires(spec: CircuitSpec, s: Solution, device: DeviceConstants = DeviceConstants(),
                     f_l: float = DEFAULT_VIA_COST) -> WireRefinement:
    """Assign, cancel and bridge every net of a placed solution."""
    nets = []
    for net in spec.nets:
        positions = [port_position(spec, s, ref) for ref in net.ports]
        nets.append(refine_net(net, positions, device, f_l))
    return WireRefinement(nets)
