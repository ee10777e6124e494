"""Circuit description, multilayer grid geometry and the annealer's solution encoding.

Everything here is an immutable value. Solutions are changed only through
:func:`solution_clone_with_move`, which returns a new object and leaves its
input untouched, so archives can hold references safely.

Coordinates are integer grid units. Layers are numbered from 1. Problem-graph
vertices (qubits) are numbered from 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from .router import RouteResult

Cell = tuple[int, int]
Vertex = tuple[int, int, int]  # (x, y, layer)

SYMMETRY_FREE = "free"
SYMMETRY_SELF = "self"
SYMMETRY_PAIR = "pair"


class MoveRejected(Exception):
    """Raised when a move cannot be applied; the caller should draw another move."""


@dataclass(frozen=True)
class Port:
    dx: int
    dy: int


@dataclass(frozen=True)
class GateSpec:
    id: str
    width: int
    height: int
    ports: tuple[Port, ...]
    rounds: tuple[int, ...] = (1,)
    symmetry: str = SYMMETRY_FREE
    partner: Optional[str] = None


@dataclass(frozen=True)
class PortRef:
    gate: str
    port: int
    layer: int = 1
    amplitude: Optional[float] = None


@dataclass(frozen=True)
class Net:
    id: str
    sources: tuple[PortRef, ...]
    sinks: tuple[PortRef, ...]
    # indices into sources + sinks; empty means singleton subnets
    subnets: tuple[tuple[int, ...], ...] = ()
    problem_edge: Optional[tuple[int, int]] = None

    @property
    def ports(self) -> tuple[PortRef, ...]:
        return self.sources + self.sinks

    def subnet_partition(self) -> tuple[tuple[int, ...], ...]:
        if self.subnets:
            return self.subnets
        return tuple((i,) for i in range(len(self.ports)))


@dataclass(frozen=True)
class Blockage:
    layer: int
    cells: frozenset[Cell]


@dataclass(frozen=True)
class ProblemGraph:
    n: int
    edges: tuple[tuple[int, int], ...]

    @property
    def m(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class CircuitSpec:
    gates: tuple[GateSpec, ...]
    nets: tuple[Net, ...]
    num_layers: int
    grid: tuple[int, int]
    problem: ProblemGraph
    blockages: tuple[Blockage, ...] = ()
    num_inputs: Optional[int] = None
    d: int = 2
    reference_distribution: Optional[tuple[float, ...]] = None
    symmetry_axis: Optional[float] = None

    def __post_init__(self):
        if self.num_inputs is None:
            object.__setattr__(self, "num_inputs", self.problem.n)

    @property
    def axis(self) -> float:
        return self.grid[0] / 2 if self.symmetry_axis is None else self.symmetry_axis

    def gate(self, gate_id: str) -> GateSpec:
        return self._gate_index()[gate_id][1]

    def gate_position(self, gate_id: str) -> int:
        return self._gate_index()[gate_id][0]

    def _gate_index(self) -> dict[str, tuple[int, GateSpec]]:
        # cached on first use; frozen dataclass so go through object.__setattr__
        try:
            return self.__dict__["_gindex"]
        except KeyError:
            index = {g.id: (i, g) for i, g in enumerate(self.gates)}
            object.__setattr__(self, "_gindex", index)
            return index

    def blocked_cells(self) -> frozenset[Vertex]:
        try:
            return self.__dict__["_blocked"]
        except KeyError:
            cells = frozenset((x, y, b.layer) for b in self.blockages for x, y in b.cells)
            object.__setattr__(self, "_blocked", cells)
            return cells


@dataclass(frozen=True)
class Placement:
    x: int
    y: int
    rotation: int = 0  # quarter turns, counter-clockwise
    layer: int = 1


@dataclass(frozen=True)
class QaoaParams:
    """Per-layer angle collections: ``gammas[l]`` has one entry per problem edge,
    ``mus[l]`` one entry per qubit."""

    gammas: tuple[tuple[float, ...], ...] = ()
    mus: tuple[tuple[float, ...], ...] = ()

    @property
    def depth(self) -> int:
        return len(self.gammas)

    @classmethod
    def from_arrays(cls, gammas, mus) -> "QaoaParams":
        return cls(tuple(tuple(float(v) for v in row) for row in gammas),
                   tuple(tuple(float(v) for v in row) for row in mus))


@dataclass(frozen=True)
class Solution:
    placements: tuple[tuple[Placement, ...], ...]  # [gate][instance]
    routes: tuple[Optional["RouteResult"], ...]  # [net]; None = stale
    qaoa: QaoaParams
    active_inputs: int
    measurement_rounds: int = 1
    measurement_gates: int = 1

    def instance(self, gate_index: int, instance: int) -> Placement:
        return self.placements[gate_index][instance]


@dataclass(frozen=True)
class MoveDescriptor:
    """One elementary change to a solution.

    ``kind`` is one of ``relocate``, ``layer``, ``rotate``, ``symmetric``,
    ``separation``, ``angle``, ``inputs``, ``measurement``. The remaining fields
    are interpreted per kind; see :func:`solution_clone_with_move`.
    """

    kind: str
    gate: Optional[str] = None
    instance: int = 0
    x: int = 0
    y: int = 0
    layer: int = 1
    rotation: int = 0
    net: int = 0
    route: Optional["RouteResult"] = None
    angle: str = "gamma"
    depth: int = 0
    index: int = 0
    value: float = 0.0
    count: int = 0
    rounds: int = 0


MOVE_KINDS = ("relocate", "layer", "rotate", "symmetric", "separation", "angle", "inputs", "measurement")


# -- geometry ---------------------------------------------------------------

def footprint_dims(gate: GateSpec, rotation: int) -> tuple[int, int]:
    if rotation % 2:
        return gate.height, gate.width
    return gate.width, gate.height


def rotate_offset(gate: GateSpec, port: Port, rotation: int) -> Cell:
    w, h = gate.width, gate.height
    dx, dy = port.dx, port.dy
    r = rotation % 4
    if r == 0:
        return dx, dy
    if r == 1:
        return h - 1 - dy, dx
    if r == 2:
        return w - 1 - dx, h - 1 - dy
    return dy, w - 1 - dx


def footprint_cells(gate: GateSpec, p: Placement) -> list[Cell]:
    w, h = footprint_dims(gate, p.rotation)
    return [(p.x + i, p.y + j) for i in range(w) for j in range(h)]


def instance_index(gate: GateSpec, layer: int) -> int:
    """Map a port reference's layer to the gate instance materialised there."""
    return gate.rounds.index(layer)


def port_position(spec: CircuitSpec, s: Solution, ref: PortRef) -> Vertex:
    gi = spec.gate_position(ref.gate)
    gate = spec.gates[gi]
    p = s.placements[gi][instance_index(gate, ref.layer)]
    ox, oy = rotate_offset(gate, gate.ports[ref.port], p.rotation)
    return p.x + ox, p.y + oy, p.layer


def initial_layers(spec: CircuitSpec) -> tuple[tuple[int, ...], ...]:
    return tuple(g.rounds for g in spec.gates)


# -- validation -------------------------------------------------------------

def validate(spec: CircuitSpec, solution: Optional[Solution] = None) -> list[str]:
    """Return human-readable invariant violations; an empty list means valid."""
    out: list[str] = []
    W, H = spec.grid
    if spec.num_layers < 1:
        out.append(f"num_layers must be >= 1 (got {spec.num_layers})")
    if spec.num_inputs < 1:
        out.append(f"num_inputs must be >= 1 (got {spec.num_inputs})")
    if spec.d < 2:
        out.append(f"basis dimension d must be >= 2 (got {spec.d})")
    if W < 1 or H < 1:
        out.append(f"grid dimensions must be positive (got {spec.grid})")
    if spec.problem.n != spec.num_inputs:
        out.append(f"problem graph has {spec.problem.n} vertices but num_inputs={spec.num_inputs}")

    ids = [g.id for g in spec.gates]
    if len(set(ids)) != len(ids):
        out.append("duplicate gate ids")
    by_id = {g.id: g for g in spec.gates}
    for g in spec.gates:
        if g.width < 1 or g.height < 1:
            out.append(f"gate {g.id}: non-positive footprint {g.width}x{g.height}")
        if not g.rounds:
            out.append(f"gate {g.id}: must be applied in at least one layer")
        if len(set(g.rounds)) != len(g.rounds):
            out.append(f"gate {g.id}: applied twice in one layer")
        for z in g.rounds:
            if not 1 <= z <= spec.num_layers:
                out.append(f"gate {g.id}: round layer {z} outside [1, {spec.num_layers}]")
        if not g.ports:
            out.append(f"gate {g.id}: has no ports")
        for k, p in enumerate(g.ports):
            if not (0 <= p.dx < g.width and 0 <= p.dy < g.height):
                out.append(f"gate {g.id}: port {k} offset ({p.dx},{p.dy}) outside the gate")
        if g.symmetry == SYMMETRY_PAIR:
            partner = by_id.get(g.partner)
            if partner is None:
                out.append(f"gate {g.id}: symmetry partner {g.partner!r} does not exist")
            elif partner.symmetry != SYMMETRY_PAIR or partner.partner != g.id:
                out.append(f"gate {g.id}: symmetry partner {g.partner} does not reference it back")
            elif (partner.width, partner.height, len(partner.rounds)) != (g.width, g.height, len(g.rounds)):
                out.append(f"gate {g.id}: symmetry partner {g.partner} has a different shape or round count")
        elif g.symmetry not in (SYMMETRY_FREE, SYMMETRY_SELF):
            out.append(f"gate {g.id}: unknown symmetry class {g.symmetry!r}")

    for net in spec.nets:
        if not net.sources or not net.sinks:
            out.append(f"net {net.id}: needs at least one source and one sink")
        if set(net.sources) & set(net.sinks):
            out.append(f"net {net.id}: a port is both source and sink")
        for ref in net.ports:
            g = by_id.get(ref.gate)
            if g is None:
                out.append(f"net {net.id}: references missing gate {ref.gate!r}")
            elif not 0 <= ref.port < len(g.ports):
                out.append(f"net {net.id}: references missing port {ref.port} on gate {ref.gate}")
            elif ref.layer not in g.rounds:
                out.append(f"net {net.id}: gate {ref.gate} is not applied in layer {ref.layer}")
            if ref.amplitude is not None and ref.amplitude < 0:
                out.append(f"net {net.id}: negative port amplitude")
        if net.subnets:
            flat = sorted(i for sub in net.subnets for i in sub)
            if flat != list(range(len(net.ports))):
                out.append(f"net {net.id}: subnets do not partition its ports")
        if net.problem_edge is not None and net.problem_edge not in spec.problem.edges:
            out.append(f"net {net.id}: problem edge {net.problem_edge} not in the problem graph")

    for b in spec.blockages:
        if not 1 <= b.layer <= spec.num_layers:
            out.append(f"blockage on layer {b.layer} outside [1, {spec.num_layers}]")
        for x, y in b.cells:
            if not (0 <= x < W and 0 <= y < H):
                out.append(f"blockage cell ({x},{y}) on layer {b.layer} outside the grid")

    for j, k in spec.problem.edges:
        if j == k:
            out.append(f"problem graph self-loop on vertex {j}")
        if not (0 <= j < spec.problem.n and 0 <= k < spec.problem.n):
            out.append(f"problem edge ({j},{k}) references a missing vertex")

    if spec.reference_distribution is not None:
        ref = spec.reference_distribution
        if len(ref) != spec.d ** spec.num_inputs:
            out.append(f"reference distribution has {len(ref)} entries, expected {spec.d ** spec.num_inputs}")
        elif any(p < 0 for p in ref) or abs(sum(ref) - 1.0) > 1e-9:
            out.append("reference distribution is not a probability vector")

    if solution is not None and not out:
        out.extend(validate_solution(spec, solution))
    return out


def validate_solution(spec: CircuitSpec, s: Solution) -> list[str]:
    out: list[str] = []
    W, H = spec.grid
    blocked = spec.blocked_cells()
    if len(s.placements) != len(spec.gates):
        return [f"solution places {len(s.placements)} gates, spec has {len(spec.gates)}"]
    occupied: dict[tuple[int, int, int], str] = {}
    for gate, insts in zip(spec.gates, s.placements):
        if len(insts) != len(gate.rounds):
            out.append(f"gate {gate.id}: {len(insts)} instances for {len(gate.rounds)} rounds")
            continue
        layers = [p.layer for p in insts]
        if len(set(layers)) != len(layers):
            out.append(f"gate {gate.id}: participates in more than one application per layer")
        for i, p in enumerate(insts):
            tag = f"{gate.id}[{i}]"
            if not 1 <= p.layer <= spec.num_layers:
                out.append(f"{tag}: layer {p.layer} outside [1, {spec.num_layers}]")
            for x, y in footprint_cells(gate, p):
                if not (0 <= x < W and 0 <= y < H):
                    out.append(f"{tag}: extends outside the grid")
                    break
            for x, y in footprint_cells(gate, p):
                if (x, y, p.layer) in blocked:
                    out.append(f"{tag}: overlaps a blockage at ({x},{y}) on layer {p.layer}")
                    break
            for x, y in footprint_cells(gate, p):
                other = occupied.get((x, y, p.layer))
                if other is not None and other != tag:
                    out.append(f"{tag}: overlaps {other} on layer {p.layer}")
                    break
                occupied[(x, y, p.layer)] = tag
    q = s.qaoa
    if len(q.gammas) != len(q.mus):
        out.append("qaoa_params: gamma and mu collections have different depths")
    for name, rows, width in (("gamma", q.gammas, spec.problem.m), ("mu", q.mus, spec.problem.n)):
        for l, row in enumerate(rows):
            if len(row) != width:
                out.append(f"qaoa_params: {name} layer {l} has {len(row)} entries, expected {width}")
            for v in row:
                if not 0.0 <= v <= math.pi:
                    out.append(f"qaoa_params: {name}={v} outside [0, pi]")
    if not 1 <= s.active_inputs <= spec.num_inputs:
        out.append(f"active_inputs={s.active_inputs} outside [1, {spec.num_inputs}]")
    if s.measurement_rounds < 0 or s.measurement_gates < 0:
        out.append("measurement plan counts must be non-negative")
    if len(s.routes) != len(spec.nets):
        out.append(f"solution carries {len(s.routes)} routes for {len(spec.nets)} nets")
    else:
        for net, r in zip(spec.nets, s.routes):
            if r is None:
                continue
            for path in r.paths:
                if any(v in blocked for v in path):
                    out.append(f"net {net.id}: route crosses a blockage")
                    break
    return out


def placement_is_legal(spec: CircuitSpec, s: Solution, gi: int, inst: int, p: Placement,
                       ignore: tuple[tuple[int, int], ...] = ()) -> bool:
    """Would instance ``inst`` of gate ``gi`` be legal at ``p``?

    ``ignore`` lists other (gate, instance) pairs that are moving at the same
    time and must not count as obstacles.
    """
    gate = spec.gates[gi]
    W, H = spec.grid
    if not 1 <= p.layer <= spec.num_layers:
        return False
    cells = footprint_cells(gate, p)
    if any(not (0 <= x < W and 0 <= y < H) for x, y in cells):
        return False
    blocked = spec.blocked_cells()
    if any((x, y, p.layer) in blocked for x, y in cells):
        return False
    for j, other in enumerate(s.placements[gi]):
        if j != inst and other.layer == p.layer:
            return False
    mine = set(cells)
    for gj, (g2, insts) in enumerate(zip(spec.gates, s.placements)):
        for j, q in enumerate(insts):
            if (gj, j) == (gi, inst) or (gj, j) in ignore or q.layer != p.layer:
                continue
            if mine.intersection(footprint_cells(g2, q)):
                return False
    return True


# -- moves ------------------------------------------------------------------

def _stale_routes(spec: CircuitSpec, s: Solution, gate_ids: set[str]):
    return tuple(None if any(ref.gate in gate_ids for ref in net.ports) else r
                 for net, r in zip(spec.nets, s.routes))


def _with_placement(s: Solution, gi: int, inst: int, p: Placement) -> tuple:
    rows = list(s.placements)
    row = list(rows[gi])
    row[inst] = p
    rows[gi] = tuple(row)
    return tuple(rows)


def _layer_move(spec: CircuitSpec, s: Solution, m: MoveDescriptor) -> Solution:
    """Move an instance to another of its gate's rounds; a sibling already there takes the freed layer."""
    gi = spec.gate_position(m.gate)
    gate = spec.gates[gi]
    old = s.placements[gi][m.instance]
    if m.layer not in gate.rounds or m.layer == old.layer:
        raise MoveRejected(f"layer {m.layer} for {m.gate}[{m.instance}]")
    new = replace(old, layer=m.layer)
    sibling = next((j for j, p in enumerate(s.placements[gi]) if j != m.instance and p.layer == m.layer), None)
    if sibling is None:
        if not placement_is_legal(spec, s, gi, m.instance, new):
            raise MoveRejected(f"layer move of {m.gate}[{m.instance}]")
        return replace(s, placements=_with_placement(s, gi, m.instance, new),
                       routes=_stale_routes(spec, s, {m.gate}))
    other = replace(s.placements[gi][sibling], layer=old.layer)
    interim = replace(s, placements=_with_placement(s, gi, m.instance, replace(old, layer=0)))
    interim = replace(interim, placements=_with_placement(interim, gi, sibling, other))
    if not placement_is_legal(spec, interim, gi, sibling, other):
        raise MoveRejected(f"layer swap of {m.gate}")
    if not placement_is_legal(spec, interim, gi, m.instance, new):
        raise MoveRejected(f"layer swap of {m.gate}")
    return replace(interim, placements=_with_placement(interim, gi, m.instance, new),
                   routes=_stale_routes(spec, s, {m.gate}))


def solution_clone_with_move(spec: CircuitSpec, s: Solution, m: MoveDescriptor) -> Solution:
    """Apply ``m`` to a copy of ``s``.

    Placement moves mark the routes of affected nets stale (``None``); the
    evaluator re-routes them. Raises :class:`MoveRejected` when the result
    would break a solution invariant.
    """
    kind = m.kind
    if kind == "layer":
        return _layer_move(spec, s, m)
    if kind in ("relocate", "rotate"):
        gi = spec.gate_position(m.gate)
        old = s.placements[gi][m.instance]
        if kind == "relocate":
            new = replace(old, x=m.x, y=m.y)
        else:
            new = replace(old, rotation=m.rotation % 4)
        if new == old or not placement_is_legal(spec, s, gi, m.instance, new):
            raise MoveRejected(f"{kind} of {m.gate}[{m.instance}] to {new}")
        return replace(s, placements=_with_placement(s, gi, m.instance, new),
                       routes=_stale_routes(spec, s, {m.gate}))

    if kind == "symmetric":
        gate = spec.gate(m.gate)
        if gate.symmetry != SYMMETRY_PAIR:
            raise MoveRejected(f"{m.gate} is not a symmetry pair member")
        gi, gj = spec.gate_position(gate.id), spec.gate_position(gate.partner)
        mirrored_x = 2 * spec.axis - m.x - gate.width
        if mirrored_x != int(mirrored_x):
            raise MoveRejected("mirror position is off-grid")
        a = replace(s.placements[gi][m.instance], x=m.x, y=m.y)
        b = replace(s.placements[gj][m.instance], x=int(mirrored_x), y=m.y)
        ignore_a, ignore_b = ((gj, m.instance),), ((gi, m.instance),)
        if not placement_is_legal(spec, s, gi, m.instance, a, ignore_a):
            raise MoveRejected("symmetric move: first cell illegal")
        if not placement_is_legal(spec, s, gj, m.instance, b, ignore_b):
            raise MoveRejected("symmetric move: mirrored cell illegal")
        if a.layer == b.layer and set(footprint_cells(gate, a)) & set(footprint_cells(spec.gates[gj], b)):
            raise MoveRejected("symmetric move: pair overlaps itself")
        interim = replace(s, placements=_with_placement(s, gi, m.instance, a))
        return replace(interim, placements=_with_placement(interim, gj, m.instance, b),
                       routes=_stale_routes(spec, s, {gate.id, gate.partner}))

    if kind == "separation":
        if m.route is None or not m.route.reachable:
            raise MoveRejected("separation move needs a reachable route")
        routes = list(s.routes)
        routes[m.net] = m.route
        return replace(s, routes=tuple(routes))

    if kind == "angle":
        if not 0.0 <= m.value <= math.pi:
            raise MoveRejected(f"angle {m.value} outside [0, pi]")
        rows = list(s.qaoa.gammas if m.angle == "gamma" else s.qaoa.mus)
        row = list(rows[m.depth])
        row[m.index] = float(m.value)
        rows[m.depth] = tuple(row)
        q = replace(s.qaoa, **{"gammas" if m.angle == "gamma" else "mus": tuple(rows)})
        return replace(s, qaoa=q)

    if kind == "inputs":
        if not 1 <= m.count <= spec.num_inputs or m.count == s.active_inputs:
            raise MoveRejected(f"active inputs {m.count}")
        return replace(s, active_inputs=m.count)

    if kind == "measurement":
        if m.rounds < 0 or m.count < 0:
            raise MoveRejected("negative measurement plan")
        if (m.rounds, m.count) == (s.measurement_rounds, s.measurement_gates):
            raise MoveRejected("measurement plan unchanged")
        return replace(s, measurement_rounds=m.rounds, measurement_gates=m.count)

    raise ValueError(f"unknown move kind {kind!r}")
