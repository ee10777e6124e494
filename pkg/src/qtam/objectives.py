"""Objective vector, constraint violations and the evaluation of one solution.

The objective vector has five entries, all minimised:

    F1  layout area: bounding-box height x number of occupied layers
    F2  total wire area after width refinement
    F3  negated objective expectation of the circuit state
    F4  number of active input systems
    F5  number of measurements, N_M * |M|

Violation values are non-positive and zero when satisfied.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .circuit import (SYMMETRY_PAIR, SYMMETRY_SELF, CircuitSpec, ProblemGraph, QaoaParams, Solution,
                      footprint_cells, footprint_dims, validate_solution)
from .dominance import relative_entropy
from .qaoa import DEFAULT_MEMORY_BUDGET, evolve, maxcut_objective, output_distribution
from .router import DEFAULT_VIA_COST, route_all, unrouted_nets
from .wires import DeviceConstants, WireRefinement, refine_wires

N_OBJ = 5
F1, F2, F3, F4, F5 = range(N_OBJ)
DEFAULT_EPSILON = 0.05  # bits


class UnroutedNetError(ValueError):
    pass


class ContractViolation(ValueError):
    pass


# -- single objectives ------------------------------------------------------

def area_f1(spec: CircuitSpec, s: Solution) -> float:
    cells = [(y, p.layer) for gate, insts in zip(spec.gates, s.placements)
             for p in insts for _, y in footprint_cells(gate, p)]
    if not cells:
        return 0.0
    ys = [y for y, _ in cells]
    layers = {z for _, z in cells}
    return float((max(ys) - min(ys) + 1) * len(layers))


def wire_area_f2(wires: Sequence[tuple[float, float]]) -> float:
    """Sum of length x width over (length, width) pairs."""
    return float(sum(l * w for l, w in wires))


def refined_wire_area(spec: CircuitSpec, s: Solution, device: DeviceConstants = DeviceConstants(),
                      f_l: float = DEFAULT_VIA_COST) -> tuple[float, WireRefinement]:
    missing = [spec.nets[i].id for i, r in enumerate(s.routes) if r is None]
    if missing:
        raise UnroutedNetError(f"unrouted nets: {', '.join(missing)}")
    ref = refine_wires(spec, s, device, f_l)
    return wire_area_f2([w for n in ref.nets for w in n.wires()]), ref


def f4_input_size(s: Solution) -> float:
    return float(s.active_inputs)


def f5_measurements(s: Solution) -> float:
    return float(s.measurement_rounds * s.measurement_gates)


def scalarized_cost(f: Sequence[float], alpha: Sequence[float],
                    secondary: Sequence[tuple[float, float]] = ()) -> float:
    f = np.asarray(f, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if f.shape != alpha.shape:
        raise ValueError(f"{len(alpha)} weights for {len(f)} objectives")
    if np.any(alpha < 0) or any(a < 0 for a, _ in secondary):
        raise ValueError("weights must be non-negative")
    return float(alpha @ f + sum(a * v for a, v in secondary))


# -- constraints ------------------------------------------------------------

def symmetry_constraint_vector(spec: CircuitSpec, s: Solution) -> list[float]:
    """Design variables of every instance, grouped by symmetry class.

    Pair and free instances contribute (x, y, r); self-symmetric ones only
    (y, r), since their x is fixed by the axis.
    """
    out: list[float] = []
    for cls in (SYMMETRY_PAIR, SYMMETRY_SELF):
        for gate, insts in zip(spec.gates, s.placements):
            if gate.symmetry == cls:
                for p in insts:
                    out.extend((p.y, p.rotation) if cls == SYMMETRY_SELF else (p.x, p.y, p.rotation))
    for gate, insts in zip(spec.gates, s.placements):
        if gate.symmetry not in (SYMMETRY_PAIR, SYMMETRY_SELF):
            for p in insts:
                out.extend((p.x, p.y, p.rotation))
    return [float(v) for v in out]


def symmetry_violations(spec: CircuitSpec, s: Solution) -> list[float]:
    axis = spec.axis
    out = []
    seen = set()
    for gi, gate in enumerate(spec.gates):
        if gate.symmetry == SYMMETRY_PAIR and gate.id not in seen:
            seen.update({gate.id, gate.partner})
            gj = spec.gate_position(gate.partner)
            for a, b in zip(s.placements[gi], s.placements[gj]):
                kappa = footprint_dims(gate, a.rotation)[0]
                out.append(-(abs(axis - 0.5 * (a.x + b.x + kappa)) + abs(a.y - b.y)))
        elif gate.symmetry == SYMMETRY_SELF:
            for p in s.placements[gi]:
                kappa = footprint_dims(gate, p.rotation)[0]
                out.append(-abs(axis - (p.x + kappa / 2)))
    return [0.0 if v == 0 else v for v in out]


def measurement_violations(s: Solution) -> list[float]:
    return [-float(max(0, 1 - s.measurement_rounds)),
            -float(max(0, s.active_inputs - s.measurement_gates))]


def layout_violations(spec: CircuitSpec, s: Solution) -> float:
    return -float(len(validate_solution(spec, s)))


def unrouted_violations(s: Solution) -> float:
    return -float(len(unrouted_nets(s)))


def closeness_violation(p_ref: Sequence[float], q: Sequence[float], epsilon: float = DEFAULT_EPSILON) -> float:
    return -max(0.0, relative_entropy(p_ref, q) - epsilon)


def violation_sums(g_list: Sequence[float], c_list: Sequence[float]) -> tuple[float, float]:
    for name, values in (("g", g_list), ("c", c_list)):
        for v in values:
            if v > 0:
                raise ContractViolation(f"positive {name} violation value {v}")
    return float(sum(g_list)), float(sum(c_list))


# -- circuit state ----------------------------------------------------------

def active_problem(problem: ProblemGraph, params: QaoaParams, n_active: int) -> tuple[ProblemGraph, QaoaParams]:
    """Subproblem induced on qubits ``0..n_active-1`` with the matching angles."""
    keep = [i for i, (j, k) in enumerate(problem.edges) if j < n_active and k < n_active]
    sub = ProblemGraph(n_active, tuple(problem.edges[i] for i in keep))
    sub_params = QaoaParams(tuple(tuple(row[i] for i in keep) for row in params.gammas),
                            tuple(tuple(row[:n_active]) for row in params.mus))
    return sub, sub_params


def circuit_distribution(problem: ProblemGraph, params: QaoaParams, n_active: int,
                         budget: int = DEFAULT_MEMORY_BUDGET) -> np.ndarray:
    """Output distribution over all ``2**n`` strings; inactive qubits read 0."""
    sub, sub_params = active_problem(problem, params, n_active)
    q = output_distribution(evolve(sub, sub_params, budget))
    full = np.zeros(2**problem.n)
    full[:len(q)] = q
    return full


# -- evaluation -------------------------------------------------------------

@dataclass
class RangeTracker:
    """Running per-objective min/max; a flat objective has range 1."""

    lo: np.ndarray = field(default_factory=lambda: np.full(N_OBJ, np.inf))
    hi: np.ndarray = field(default_factory=lambda: np.full(N_OBJ, -np.inf))

    def update(self, f: Sequence[float]) -> None:
        f = np.asarray(f, dtype=float)
        self.lo = np.minimum(self.lo, f)
        self.hi = np.maximum(self.hi, f)

    def ranges(self) -> np.ndarray:
        r = self.hi - self.lo
        return np.where(np.isfinite(r) & (r > 0), r, 1.0)


@dataclass(frozen=True)
class EvalConfig:
    f_l: float = DEFAULT_VIA_COST
    epsilon: float = DEFAULT_EPSILON
    alpha: tuple[float, ...] = (1.0,) * N_OBJ
    device: DeviceConstants = DeviceConstants()
    budget: int = DEFAULT_MEMORY_BUDGET


@dataclass(frozen=True, eq=False)
class Evaluation:
    solution: Solution
    f: np.ndarray
    g_list: tuple[float, ...]
    c_list: tuple[float, ...]
    expectation: float
    distribution: np.ndarray
    wire_refinement: Optional[WireRefinement] = None

    @property
    def g_s(self) -> float:
        return float(sum(self.g_list))

    @property
    def c_s(self) -> float:
        return float(sum(self.c_list))

    @property
    def feasible(self) -> bool:
        return self.g_s == 0 and self.c_s == 0


def segment_objective(spec: CircuitSpec, distribution: np.ndarray):
    """Per-net segment evaluator: the clause expectation of the net's problem edge."""

    def for_net(net):
        if net.problem_edge is None:
            return None
        value = float(distribution @ maxcut_objective(spec.problem.n, [net.problem_edge]).values)
        return lambda a, b: value

    return for_net


def evaluate(spec: CircuitSpec, s: Solution, cfg: EvalConfig = EvalConfig()) -> Evaluation:
    """Route stale nets, refine wires and compute objectives and violations."""
    C = maxcut_objective(spec.problem.n, spec.problem.edges)
    dist = circuit_distribution(spec.problem, s.qaoa, s.active_inputs, cfg.budget)
    expectation = float(dist @ C.values)

    s = route_all(spec, s, cfg.f_l, segment_objective(spec, dist))
    f2, refinement = refined_wire_area(spec, s, cfg.device, cfg.f_l)
    f = np.array([area_f1(spec, s), f2, -expectation, f4_input_size(s), f5_measurements(s)])

    g_list = [layout_violations(spec, s), unrouted_violations(s)]
    g_list += symmetry_violations(spec, s)
    g_list += measurement_violations(s)
    c_list = []
    if spec.reference_distribution is not None:
        c_list.append(closeness_violation(spec.reference_distribution, dist, cfg.epsilon))
    g_list = tuple(0.0 if v == 0 else float(v) for v in g_list)
    c_list = tuple(0.0 if v == 0 else float(v) for v in c_list)
    violation_sums(g_list, c_list)
    if not np.all(np.isfinite(f)):
        raise ValueError(f"non-finite objective vector {f}")
    return Evaluation(s, f, g_list, c_list, expectation, dist, refinement)
