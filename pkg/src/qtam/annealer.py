"""Constrained multi-objective simulated annealing with three temperatures.

One chain keeps a current point ``xi`` and a bounded archive of mutually
nondominated evaluations. Each iteration draws a neighbour ``nu`` with the
move operator, classifies the pair with constrained dominance and then
follows one of five cases:

    a  xi dominates nu: accept nu with the averaged-dominance probability
    b  neither dominates, some archive points dominate nu: as a, shifted
    c  neither dominates, nu is nondominated by the archive: add, truncate
    d  neither dominates, nu dominates archive points: add, drop them
    e  nu dominates xi: if archive points dominate nu, jump to the closest
       of them with probability p, else move to nu; otherwise add as c/d

Temperatures scale the acceptance exponents directly.
"""
from __future__ import annotations

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .circuit import (MOVE_KINDS, SYMMETRY_PAIR, CircuitSpec, MoveDescriptor, MoveRejected, Placement,
                      QaoaParams, Solution, footprint_dims, placement_is_legal, solution_clone_with_move)
from .dominance import Dominance, closeness_dominance, constraint_dominance, objective_dominance, pareto_check
from .objectives import EvalConfig, Evaluation, RangeTracker, evaluate
from .router import GridGraph, candidate_route, candidate_separation_points, net_pins, route_via

log = logging.getLogger(__name__)

EXP_CLAMP = 500.0
ANGLE_SIGMA = 0.1
MAX_MOVE_TRIES = 50


# -- schedules and acceptance -----------------------------------------------

@dataclass(frozen=True)
class TemperatureSchedule:
    t_max: float = 1.0
    rate: float = 1.0
    k: float = 100.0

    def __post_init__(self):
        if self.t_max <= 0 or self.rate <= 0 or self.k <= 0:
            raise ValueError(f"schedule parameters must be positive: {self}")

    def __call__(self, t: float) -> float:
        if t < 0:
            raise ValueError("iteration must be non-negative")
        return self.t_max * math.exp(-self.rate * t / self.k)


def _logistic(exponent: float) -> float:
    """``1 / (1 + e^x)`` with ``x`` clamped to keep the result in (0, 1)."""
    x = min(max(exponent, -EXP_CLAMP), EXP_CLAMP)
    return 1.0 / (1.0 + math.exp(x))


def acceptance_case_a(df: float, dg: float, dc: float, tf: float, tg: float, tc: float) -> float:
    if min(tf, tg, tc) <= 0:
        raise ValueError("temperatures must be positive")
    return _logistic(df * tf + dg * tg + dc * tc)


def shifted_averages(df: float, dg: float, dc: float, d_xi_nu_f: float, d_nu_xi_g: float,
                     d_nu_xi_c: float) -> tuple[float, float, float]:
    return df - d_xi_nu_f, dg + d_nu_xi_g, dc + d_nu_xi_c


def acceptance_case_b(df_k: float, dg_k: float, dc_k: float, tf: float, tg: float, tc: float) -> float:
    return acceptance_case_a(df_k, dg_k, dc_k, tf, tg, tc)


def acceptance_case_e(d_min: float) -> float:
    return _logistic(-d_min)


# -- dominance bookkeeping --------------------------------------------------

class OpCounter:
    """Thread-safe counters for dominance checks and archive comparisons."""

    def __init__(self):
        self._lock = threading.Lock()
        self.counts = {"dominance": 0, "archive_comparisons": 0, "evaluations": 0}

    def add(self, key: str, n: int = 1) -> None:
        with self._lock:
            self.counts[key] = self.counts.get(key, 0) + n

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return dict(self.counts)


def _check(x: Evaluation, y: Evaluation, counter: Optional[OpCounter]) -> Dominance:
    if counter is not None:
        counter.add("dominance")
    return pareto_check(x, y)


@dataclass(frozen=True)
class PairDominance:
    """The three dominance values ``d_{x,y}`` for one ordered pair."""

    f: float
    g: float
    c: float


def pair_dominance(x: Evaluation, y: Evaluation, ranges: Optional[Sequence[float]] = None) -> PairDominance:
    return PairDominance(objective_dominance(x.f, y.f, ranges)[0],
                         constraint_dominance(x.g_s, y.g_s)[0],
                         closeness_dominance(x.c_s, y.c_s)[0])


def average_dominances(nu: Evaluation, xi: Evaluation, dominators: Sequence[Evaluation],
                       ranges: Optional[Sequence[float]] = None) -> tuple[float, float, float]:
    k = len(dominators)
    df = sum(pair_dominance(a, nu, ranges).f for a in dominators) + pair_dominance(xi, nu, ranges).f
    dg = -sum(pair_dominance(nu, a, ranges).g for a in dominators) - pair_dominance(nu, xi, ranges).g
    dc = -sum(pair_dominance(nu, a, ranges).c for a in dominators) - pair_dominance(nu, xi, ranges).c
    return df / (k + 1), dg / (k + 1), dc / (k + 1)


def min_dominance(nu: Evaluation, dominators: Sequence[Evaluation],
                  ranges: Optional[Sequence[float]] = None) -> tuple[float, int]:
    """Smallest ``d_{nu,k}(f) - (d_{k,nu}(g) + d_{k,nu}(c))`` and the index attaining it."""
    if not dominators:
        raise ValueError("need at least one dominating archive point")
    values = []
    for a in dominators:
        fwd, back = pair_dominance(nu, a, ranges), pair_dominance(a, nu, ranges)
        values.append(fwd.f - (back.g + back.c))
    i = int(np.argmin(values))
    return float(values[i]), i


# -- archive ----------------------------------------------------------------

def crowding_distance(F: np.ndarray) -> np.ndarray:
    """Per-row crowding distance of an objective matrix; boundary rows get inf."""
    F = np.asarray(F, dtype=float)
    n = len(F)
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for j in range(F.shape[1]):
        order = np.argsort(F[:, j], kind="stable")
        col = F[order, j]
        span = col[-1] - col[0]
        # a flat objective carries no spread information
        if span == 0:
            continue
        dist[order[0]] = dist[order[-1]] = np.inf
        dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


@dataclass
class ParetoArchive:
    capacity: int
    members: list[Evaluation] = field(default_factory=list)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("archive capacity must be >= 1")

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def contains(self, e: Evaluation) -> bool:
        return any(m.solution == e.solution for m in self.members)

    def relations(self, nu: Evaluation, counter: Optional[OpCounter] = None
                  ) -> tuple[list[Evaluation], list[Evaluation]]:
        """Archive members dominating ``nu`` and those ``nu`` dominates."""
        above, below = [], []
        for m in self.members:
            if counter is not None:
                counter.add("archive_comparisons")
            outcome = _check(m, nu, counter)
            if outcome is Dominance.X_DOMINATES:
                above.append(m)
            elif outcome is Dominance.Y_DOMINATES:
                below.append(m)
        return above, below

    def add_and_truncate(self, nu: Evaluation) -> None:
        if not self.contains(nu):
            self.members.append(nu)
        if len(self.members) > self.capacity:
            dist = crowding_distance(np.array([m.f for m in self.members]))
            keep = sorted(range(len(self.members)), key=lambda i: (-dist[i], i))[:self.capacity]
            self.members = [self.members[i] for i in sorted(keep)]

    def add_and_remove(self, nu: Evaluation, dominated: Sequence[Evaluation]) -> None:
        gone = {id(d) for d in dominated}
        self.members = [m for m in self.members if id(m) not in gone]
        if not self.contains(nu):
            self.members.append(nu)

    def is_nondominated(self) -> bool:
        return all(pareto_check(a, b) is Dominance.NONDOMINATED
                   for i, a in enumerate(self.members) for b in self.members[i + 1:])


def archive_insert(a: ParetoArchive, nu: Evaluation, counter: Optional[OpCounter] = None) -> str:
    """Insert ``nu`` keeping the archive nondominated; returns what happened."""
    above, below = a.relations(nu, counter)
    if above:
        return "rejected"
    if below:
        a.add_and_remove(nu, below)
        return "replaced"
    a.add_and_truncate(nu)
    return "added"


def nondominated(evals: Sequence[Evaluation]) -> list[Evaluation]:
    out = []
    for i, e in enumerate(evals):
        if any(j != i and pareto_check(o, e) is Dominance.X_DOMINATES for j, o in enumerate(evals)):
            continue
        if any(o.solution == e.solution for o in out):
            continue
        out.append(e)
    return out


# -- move operator ----------------------------------------------------------

DEFAULT_MOVE_WEIGHTS = {k: 1.0 for k in MOVE_KINDS}


def _random_instance(spec: CircuitSpec, rng: np.random.Generator) -> tuple[int, int]:
    gi = int(rng.integers(len(spec.gates)))
    return gi, int(rng.integers(len(spec.gates[gi].rounds)))


def propose_move(spec: CircuitSpec, s: Solution, kind: str, rng: np.random.Generator,
                 graph: Optional[GridGraph] = None) -> MoveDescriptor:
    W, H = spec.grid
    if kind in ("relocate", "layer", "rotate"):
        gi, inst = _random_instance(spec, rng)
        gate = spec.gates[gi]
        p = s.placements[gi][inst]
        if kind == "relocate":
            w, h = footprint_dims(gate, p.rotation)
            if w > W or h > H:
                raise MoveRejected("gate larger than grid")
            return MoveDescriptor("relocate", gate.id, inst, x=int(rng.integers(W - w + 1)),
                                  y=int(rng.integers(H - h + 1)))
        if kind == "layer":
            others = [z for z in gate.rounds if z != p.layer]
            if not others:
                raise MoveRejected(f"{gate.id} has a single round")
            return MoveDescriptor("layer", gate.id, inst, layer=others[int(rng.integers(len(others)))])
        return MoveDescriptor("rotate", gate.id, inst, rotation=(p.rotation + int(rng.integers(1, 4))) % 4)

    if kind == "symmetric":
        pairs = [g for g in spec.gates if g.symmetry == SYMMETRY_PAIR]
        if not pairs:
            raise MoveRejected("no symmetry pairs")
        gate = pairs[int(rng.integers(len(pairs)))]
        inst = int(rng.integers(len(gate.rounds)))
        w, h = footprint_dims(gate, s.placements[spec.gate_position(gate.id)][inst].rotation)
        return MoveDescriptor("symmetric", gate.id, inst, x=int(rng.integers(max(W - w + 1, 1))),
                              y=int(rng.integers(max(H - h + 1, 1))))

    if kind == "separation":
        multi = [i for i, n in enumerate(spec.nets) if len(n.ports) > 2]
        if not multi:
            raise MoveRejected("no multi-pin nets")
        ni = multi[int(rng.integers(len(multi)))]
        g = graph or GridGraph.from_spec(spec)
        src, others = net_pins(spec, s, spec.nets[ni])
        cands = candidate_separation_points(g, src, others)
        if not cands:
            raise MoveRejected("no separation candidates")
        c = route_via(g, src, others, cands[int(rng.integers(len(cands)))])
        if c is None:
            raise MoveRejected("separation point unreachable")
        return MoveDescriptor("separation", net=ni, route=candidate_route(c))

    if kind == "angle":
        q = s.qaoa
        if q.depth == 0:
            raise MoveRejected("no angles")
        depth = int(rng.integers(q.depth))
        which = "gamma" if rng.random() < 0.5 else "mu"
        row = q.gammas[depth] if which == "gamma" else q.mus[depth]
        if not row:
            raise MoveRejected("empty angle row")
        index = int(rng.integers(len(row)))
        value = float(np.clip(row[index] + rng.normal(0.0, ANGLE_SIGMA), 0.0, math.pi))
        return MoveDescriptor("angle", angle=which, depth=depth, index=index, value=value)

    if kind == "inputs":
        return MoveDescriptor("inputs", count=s.active_inputs + (1 if rng.random() < 0.5 else -1))

    if kind == "measurement":
        step = 1 if rng.random() < 0.5 else -1
        if rng.random() < 0.5:
            return MoveDescriptor("measurement", rounds=s.measurement_rounds + step, count=s.measurement_gates)
        return MoveDescriptor("measurement", rounds=s.measurement_rounds, count=s.measurement_gates + step)

    raise ValueError(f"unknown move kind {kind!r}")


def move(spec: CircuitSpec, s: Solution, weights: dict[str, float], rng: np.random.Generator,
         graph: Optional[GridGraph] = None) -> Optional[Solution]:
    """The neighbourhood operator; ``None`` when every try was rejected."""
    kinds = [k for k in MOVE_KINDS if weights.get(k, 0) > 0]
    if not kinds:
        raise ValueError("all move weights are zero")
    w = np.array([weights[k] for k in kinds], dtype=float)
    w /= w.sum()
    for _ in range(MAX_MOVE_TRIES):
        kind = kinds[int(rng.choice(len(kinds), p=w))]
        try:
            return solution_clone_with_move(spec, s, propose_move(spec, s, kind, rng, graph))
        except MoveRejected:
            continue
    return None


# -- initial solutions ------------------------------------------------------

def random_solution(spec: CircuitSpec, rng: np.random.Generator, depth: int = 1,
                    tries: int = 200) -> Solution:
    """Legal random placement with uniform random angles; routes left stale."""
    W, H = spec.grid
    # layer 0 parks unplaced instances off the grid's layers
    parked = Placement(0, 0, 0, 0)
    s = Solution(tuple((parked,) * len(g.rounds) for g in spec.gates), (None,) * len(spec.nets),
                 QaoaParams(), spec.num_inputs, 1, spec.num_inputs)
    for gi, gate in enumerate(spec.gates):
        for inst, z in enumerate(gate.rounds):
            for _ in range(tries):
                rot = int(rng.integers(4))
                w, h = footprint_dims(gate, rot)
                if w > W or h > H:
                    continue
                p = Placement(int(rng.integers(W - w + 1)), int(rng.integers(H - h + 1)), rot, z)
                if placement_is_legal(spec, s, gi, inst, p):
                    row = list(s.placements[gi])
                    row[inst] = p
                    s = replace(s, placements=s.placements[:gi] + (tuple(row),) + s.placements[gi + 1:])
                    break
            else:
                raise RuntimeError(f"could not place {gate.id} on layer {z} after {tries} tries")
    m, n = spec.problem.m, spec.problem.n
    q = QaoaParams.from_arrays(rng.uniform(0, math.pi, (depth, m)), rng.uniform(0, math.pi, (depth, n)))
    return replace(s, qaoa=q)


# -- main loop --------------------------------------------------------------

@dataclass(frozen=True)
class AnnealerConfig:
    iterations: int = 1000
    t_f: TemperatureSchedule = TemperatureSchedule()
    t_g: TemperatureSchedule = TemperatureSchedule()
    t_c: TemperatureSchedule = TemperatureSchedule()
    archive_size: int = 50
    initial_size: int = 10
    seed: int = 0
    qaoa_depth: int = 1
    move_weights: dict = field(default_factory=lambda: dict(DEFAULT_MOVE_WEIGHTS))
    eval: EvalConfig = EvalConfig()

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.initial_size < 1:
            raise ValueError("initial_size must be >= 1")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    case: str
    probability: float
    accepted: bool
    archive_size: int


@dataclass
class RunResult:
    archive: ParetoArchive
    trace: list[TraceRow]
    counters: dict[str, int]
    current: Optional[Evaluation] = None


def qtam_run(spec: CircuitSpec, cfg: AnnealerConfig, counter: Optional[OpCounter] = None,
             callback: Optional[Callable[[int, ParetoArchive], None]] = None,
             rng: Optional[np.random.Generator] = None) -> RunResult:
    """One annealing chain; deterministic for a fixed ``cfg.seed``.

    ``callback(i, archive)`` runs after every iteration.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    counter = counter or OpCounter()
    graph = GridGraph.from_spec(spec, cfg.eval.f_l)
    ranges = RangeTracker()

    def ev(s: Solution) -> Evaluation:
        counter.add("evaluations")
        e = evaluate(spec, s, cfg.eval)
        ranges.update(e.f)
        return e

    initial = [ev(random_solution(spec, rng, cfg.qaoa_depth)) for _ in range(cfg.initial_size)]
    archive = ParetoArchive(cfg.archive_size)
    for e in nondominated(initial):
        archive.add_and_truncate(e)
    xi = archive.members[int(rng.integers(len(archive)))]
    trace: list[TraceRow] = []

    i = 0
    while i < cfg.iterations:
        tf, tg, tc = cfg.t_f(i), cfg.t_g(i), cfg.t_c(i)
        s_nu = move(spec, xi.solution, cfg.move_weights, rng, graph)
        if s_nu is None:
            trace.append(TraceRow(i, "none", 0.0, False, len(archive)))
            i += 1
            continue
        nu = ev(s_nu)
        R = ranges.ranges()
        rel = _check(xi, nu, counter)
        above, below = archive.relations(nu, counter)
        p, accepted = 1.0, True

        if rel is Dominance.X_DOMINATES:
            case = "a"
            p = acceptance_case_a(*average_dominances(nu, xi, above, R), tf, tg, tc)
            accepted = bool(rng.random() < p)
            if accepted:
                xi = nu
        elif rel is Dominance.NONDOMINATED:
            if above:
                case = "b"
                df, dg, dc = average_dominances(nu, xi, above, R)
                pd, pr = pair_dominance(xi, nu, R), pair_dominance(nu, xi, R)
                p = acceptance_case_b(*shifted_averages(df, dg, dc, pd.f, pr.g, pr.c), tf, tg, tc)
                accepted = bool(rng.random() < p)
                if accepted:
                    xi = nu
            elif below:
                case = "d"
                xi = nu
                archive.add_and_remove(nu, below)
            else:
                case = "c"
                xi = nu
                archive.add_and_truncate(nu)
        else:
            if above:
                case = "e"
                d_min, j = min_dominance(nu, above, R)
                p = acceptance_case_e(d_min)
                accepted = bool(rng.random() < p)
                xi = above[j] if accepted else nu
            else:
                case = "e4"
                xi = nu
                if below:
                    archive.add_and_remove(nu, below)
                else:
                    archive.add_and_truncate(nu)

        trace.append(TraceRow(i, case, p, accepted, len(archive)))
        if callback is not None:
            callback(i, archive)
        i += 1

    log.debug("chain seed=%s finished: archive=%d", cfg.seed, len(archive))
    return RunResult(archive, trace, counter.snapshot(), xi)


def merge_archives(archives: Sequence[ParetoArchive], capacity: int) -> ParetoArchive:
    merged = ParetoArchive(capacity)
    for e in nondominated([m for a in archives for m in a]):
        merged.add_and_truncate(e)
    return merged


def run_chains(spec: CircuitSpec, cfg: AnnealerConfig, chains: int = 1,
               counter: Optional[OpCounter] = None) -> tuple[ParetoArchive, list[RunResult]]:
    """Independent chains with seeds derived from ``cfg.seed``; archives merged afterwards."""
    if chains < 1:
        raise ValueError("chains must be >= 1")
    counter = counter or OpCounter()
    if chains == 1:
        r = qtam_run(spec, cfg, counter)
        return r.archive, [r]
    seeds = np.random.SeedSequence(cfg.seed).spawn(chains)
    with ThreadPoolExecutor(max_workers=chains) as pool:
        futures = [pool.submit(qtam_run, spec, cfg, counter, None, np.random.default_rng(sq)) for sq in seeds]
        results = [f.result() for f in futures]
    return merge_archives([r.archive for r in results], cfg.archive_size), results
