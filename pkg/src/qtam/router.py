"""Multilayer grid routing.

The grid is rectilinear: a vertex ``(x, y, z)`` connects to its four
in-layer neighbours at unit cost and to the vertices directly above and below
at the via cost ``f_l``. Shortest paths use A* with ``f = g + h`` where ``g``
is the accumulated path cost and ``h`` the L1-plus-via lower bound, which is
admissible on this grid, so A* returns exact minima.

Nets with one source and several sinks are routed as a tree through a shared
separation point: a trunk ``src -> delta`` and one branch ``delta -> sink``
per sink.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional, Sequence

from .circuit import CircuitSpec, Net, Solution, Vertex, port_position

DEFAULT_VIA_COST = 2.0
MAX_CANDIDATES = 64


@dataclass(frozen=True)
class GridGraph:
    width: int
    height: int
    layers: int
    blocked: frozenset[Vertex] = frozenset()
    via_cost: float = DEFAULT_VIA_COST

    @classmethod
    def from_spec(cls, spec: CircuitSpec, via_cost: float = DEFAULT_VIA_COST) -> "GridGraph":
        return cls(spec.grid[0], spec.grid[1], spec.num_layers, spec.blocked_cells(), via_cost)

    def contains(self, v: Vertex) -> bool:
        x, y, z = v
        return 0 <= x < self.width and 0 <= y < self.height and 1 <= z <= self.layers

    def is_free(self, v: Vertex) -> bool:
        return self.contains(v) and v not in self.blocked

    def neighbors(self, v: Vertex) -> Iterable[tuple[Vertex, float]]:
        x, y, z = v
        for u in ((x + 1, y, z), (x - 1, y, z), (x, y + 1, z), (x, y - 1, z)):
            if self.is_free(u):
                yield u, 1.0
        for u in ((x, y, z + 1), (x, y, z - 1)):
            if self.is_free(u):
                yield u, self.via_cost


@dataclass(frozen=True)
class RouteResult:
    """A routed net: one path per segment, the total cost, the trunk length
    shared by every branch (overlap) and the separation point if any."""

    paths: tuple[tuple[Vertex, ...], ...]
    cost: float
    overlap: float = 0.0
    separation: Optional[Vertex] = None
    objective: float = 0.0
    reachable: bool = True

    @property
    def path(self) -> tuple[Vertex, ...]:
        """All segments joined, dropping repeated junction vertices."""
        out: list[Vertex] = []
        for p in self.paths:
            out.extend(p[1:] if out and p and out[-1] == p[0] else p)
        return tuple(out)


UNREACHABLE = RouteResult(paths=(), cost=math.inf, reachable=False)


def l1_distance(a: Sequence[int], b: Sequence[int]) -> int:
    return abs(b[0] - a[0]) + abs(b[1] - a[1])


def wire_length(a: Vertex, b: Vertex, f_l: float = DEFAULT_VIA_COST) -> float:
    """Port-to-port length: in-layer L1 plus ``f_l`` per layer crossed."""
    if f_l < 0:
        raise ValueError("inter-layer cost must be non-negative")
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) + abs(a[2] - b[2]) * f_l


def path_cost(g: GridGraph, path: Sequence[Vertex]) -> float:
    return sum(1.0 if u[2] == v[2] else g.via_cost for u, v in zip(path, path[1:]))


def qspa_shortest_path(g: GridGraph, src: Vertex, dst: Vertex,
                       on_expand: Optional[Callable[[Vertex, float], None]] = None) -> RouteResult:
    """Lowest-cost path from ``src`` to ``dst`` by A*.

    ``on_expand(v, h)`` is called for every expanded vertex with its heuristic
    value; tests use it to check admissibility against true distances.
    """
    if not (g.is_free(src) and g.is_free(dst)):
        return UNREACHABLE

    def h(v: Vertex) -> float:
        return wire_length(v, dst, g.via_cost)

    counter = itertools.count()
    best = {src: 0.0}
    parent: dict[Vertex, Vertex] = {}
    heap = [(h(src), 0.0, src, next(counter))]
    closed = set()
    while heap:
        _, cost, v, _ = heapq.heappop(heap)
        if v in closed:
            continue
        closed.add(v)
        if on_expand is not None:
            on_expand(v, h(v))
        if v == dst:
            path = [v]
            while path[-1] != src:
                path.append(parent[path[-1]])
            return RouteResult(paths=(tuple(reversed(path)),), cost=cost)
        for u, w in g.neighbors(v):
            c = cost + w
            if c < best.get(u, math.inf):
                best[u] = c
                parent[u] = v
                heapq.heappush(heap, (c + h(u), c, u, next(counter)))
    return UNREACHABLE


@dataclass(frozen=True)
class SeparationCandidate:
    vertex: Vertex
    cost: float
    overlap: float
    objective: float
    paths: tuple[tuple[Vertex, ...], ...] = ()


def choose_candidate(candidates: Sequence[SeparationCandidate]) -> SeparationCandidate:
    """Largest objective first; ties go to lower cost, then larger overlap, then vertex order."""
    if not candidates:
        raise ValueError("no separation candidates")
    return min(candidates, key=lambda c: (-c.objective, c.cost, -c.overlap, c.vertex))


def candidate_separation_points(g: GridGraph, src: Vertex, sinks: Sequence[Vertex],
                                limit: int = MAX_CANDIDATES) -> list[Vertex]:
    """Free vertices on the pins' bounding-box boundary and the L-corners of each
    source/sink pair, plus the pins themselves; the ``limit`` cheapest by the
    wire-length lower bound are kept."""
    pins = [src, *sinks]
    xs, ys, zs = zip(*pins)
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    cands: set[Vertex] = set(pins)
    for z in range(min(zs), max(zs) + 1):
        for x in range(x0, x1 + 1):
            cands.update({(x, y0, z), (x, y1, z)})
        for y in range(y0, y1 + 1):
            cands.update({(x0, y, z), (x1, y, z)})
    for t in sinks:
        for z in {src[2], t[2]}:
            cands.update({(src[0], t[1], z), (t[0], src[1], z)})
    free = [v for v in cands if g.is_free(v)]

    def bound(v: Vertex) -> float:
        return wire_length(src, v, g.via_cost) + sum(wire_length(v, t, g.via_cost) for t in sinks)

    free.sort(key=lambda v: (bound(v), v))
    return free[:limit]


SegmentObjective = Callable[[Vertex, Vertex], float]


def route_via(g: GridGraph, src: Vertex, sinks: Sequence[Vertex], delta: Vertex,
              c_eval: Optional[SegmentObjective] = None) -> Optional[SeparationCandidate]:
    trunk = qspa_shortest_path(g, src, delta)
    if not trunk.reachable:
        return None
    branches = [qspa_shortest_path(g, delta, t) for t in sinks]
    if not all(b.reachable for b in branches):
        return None
    objective = 0.0
    if c_eval is not None:
        objective = c_eval(src, delta) + sum(c_eval(delta, t) for t in sinks)
    return SeparationCandidate(
        vertex=delta,
        cost=trunk.cost + sum(b.cost for b in branches),
        overlap=trunk.cost,
        objective=objective,
        paths=trunk.paths + tuple(b.paths[0] for b in branches),
    )


def select_separation_point(g: GridGraph, src: Vertex, sinks: Sequence[Vertex],
                            c_eval: Optional[SegmentObjective] = None,
                            candidates: Optional[Sequence[Vertex]] = None) -> RouteResult:
    """Route ``src`` to every sink through the best shared separation point."""
    if candidates is None:
        candidates = candidate_separation_points(g, src, sinks)
    evaluated = [c for c in (route_via(g, src, sinks, v, c_eval) for v in candidates) if c is not None]
    if not evaluated:
        return UNREACHABLE
    best = choose_candidate(evaluated)
    return candidate_route(best)


def candidate_route(c: SeparationCandidate) -> RouteResult:
    return RouteResult(paths=c.paths, cost=c.cost, overlap=c.overlap,
                       separation=c.vertex, objective=c.objective)


def net_pins(spec: CircuitSpec, s: Solution, net: Net) -> tuple[Vertex, list[Vertex]]:
    """Root pin (first source) and the remaining pins of a net."""
    pins = [port_position(spec, s, ref) for ref in net.ports]
    return pins[0], pins[1:]


def route_net(g: GridGraph, src: Vertex, others: Sequence[Vertex],
              c_eval: Optional[SegmentObjective] = None) -> RouteResult:
    if len(others) == 1:
        r = qspa_shortest_path(g, src, others[0])
        if r.reachable and c_eval is not None:
            r = replace(r, objective=c_eval(src, others[0]))
        return r
    return select_separation_point(g, src, others, c_eval)


def route_all(spec: CircuitSpec, s: Solution, via_cost: float = DEFAULT_VIA_COST,
              segment_objective: Optional[Callable[[Net], Optional[SegmentObjective]]] = None,
              graph: Optional[GridGraph] = None) -> Solution:
    """Route every net whose route is stale; unroutable nets get an unreachable result."""
    if all(r is not None for r in s.routes):
        return s
    g = graph or GridGraph.from_spec(spec, via_cost)
    routes = []
    for net, r in zip(spec.nets, s.routes):
        if r is None:
            src, others = net_pins(spec, s, net)
            c_eval = segment_objective(net) if segment_objective is not None else None
            r = route_net(g, src, others, c_eval)
        routes.append(r)
    return replace(s, routes=tuple(routes))


def unrouted_nets(s: Solution) -> list[int]:
    return [i for i, r in enumerate(s.routes) if r is None or not r.reachable]
