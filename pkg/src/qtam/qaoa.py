"""Dense statevector evaluation of a combinatorial objective expectation.

Basis index convention: ``z = sum_j b_j * 2**j``, so qubit ``j`` is bit ``j``
of the amplitude index. Spins are ``z_j = 1 - 2 b_j``.

Two phase conventions appear and both are kept as written:

* :func:`apply_phase_unitary` applies ``exp(-i gamma C)`` for a diagonal
  objective ``C``;
* :func:`apply_edge_phases` applies ``exp(+i gamma_jk Z_j Z_k)`` per edge,
  which is what :func:`evolve` uses.

Since ``C_jk = (1 - Z_j Z_k) / 2``, ``exp(-i g C_jk)`` equals
``exp(+i (g/2) Z_j Z_k)`` up to a global phase, so the two differ only by a
factor of two in the angle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .circuit import ProblemGraph, QaoaParams

DEFAULT_MEMORY_BUDGET = 512 * 2**20  # bytes
_BYTES_PER_AMPLITUDE = np.dtype(np.complex128).itemsize


class CapacityError(MemoryError):
    """The requested statevector does not fit the memory budget."""


@dataclass(frozen=True)
class DiagonalObjective:
    """Objective values ``C(z)`` for every computational basis string."""

    values: np.ndarray
    n: int
    edges: tuple[tuple[int, int], ...] = ()

    def __neg__(self) -> "DiagonalObjective":
        return DiagonalObjective(-self.values, self.n, self.edges)

    @property
    def max(self) -> float:
        return float(self.values.max())


def _bits(n: int, budget: int = DEFAULT_MEMORY_BUDGET) -> np.ndarray:
    """(2**n, n) array of bit values, column j is qubit j."""
    _check_capacity(n, 2, budget)
    idx = np.arange(2**n)
    return (idx[:, None] >> np.arange(n)[None, :]) & 1


def _spins(n: int) -> np.ndarray:
    return 1 - 2 * _bits(n)


def maxcut_objective(n: int, edges: Iterable[tuple[int, int]]) -> DiagonalObjective:
    """Edge form ``C(z) = sum_<jk> (1 - z_j z_k) / 2``."""
    edges = tuple(tuple(e) for e in edges)
    spins = _spins(n)
    values = np.zeros(2**n)
    for j, k in edges:
        values += 0.5 * (1 - spins[:, j] * spins[:, k])
    return DiagonalObjective(values, n, edges)


def clause_objective(n: int, clauses: Sequence[Callable[[np.ndarray], bool]]) -> DiagonalObjective:
    """Clause form: each clause maps a bit vector to satisfied / not satisfied."""
    bits = _bits(n)
    values = np.array([sum(bool(c(b)) for c in clauses) for b in bits], dtype=float)
    return DiagonalObjective(values, n)


def problem_objective(problem: ProblemGraph) -> DiagonalObjective:
    return maxcut_objective(problem.n, problem.edges)


def _check_capacity(n: int, d: int, budget: int) -> None:
    if d != 2:
        raise ValueError(f"only qubit systems (d=2) are supported, got d={d}")
    need = d**n * _BYTES_PER_AMPLITUDE
    if need > budget:
        raise CapacityError(f"{n} qubits need {need} bytes, budget is {budget}")


def uniform_superposition(n: int, d: int = 2, budget: int = DEFAULT_MEMORY_BUDGET) -> np.ndarray:
    if n < 1:
        raise ValueError("need at least one qubit")
    # strict: a vector filling the whole budget is refused
    _check_capacity(n, d, budget - 1)
    return np.full(2**n, 1 / math.sqrt(2**n), dtype=np.complex128)


def basis_state(n: int, index: int) -> np.ndarray:
    psi = np.zeros(2**n, dtype=np.complex128)
    psi[index] = 1.0
    return psi


def num_qubits(psi: np.ndarray) -> int:
    n = int(round(math.log2(len(psi))))
    if 2**n != len(psi):
        raise ValueError(f"statevector length {len(psi)} is not a power of two")
    return n


def apply_phase_unitary(psi: np.ndarray, C: DiagonalObjective, gamma: float) -> np.ndarray:
    """``exp(-i gamma C) |psi>``."""
    if len(C.values) != len(psi):
        raise ValueError("objective and statevector dimensions differ")
    return psi * np.exp(-1j * gamma * C.values)


def apply_edge_phases(psi: np.ndarray, edges: Sequence[tuple[int, int]], gammas: Sequence[float]) -> np.ndarray:
    """Product over edges of ``exp(+i gamma_jk Z_j Z_k)``."""
    if len(edges) != len(gammas):
        raise ValueError(f"{len(gammas)} angles for {len(edges)} edges")
    if not edges:
        return psi.copy()
    spins = _spins(num_qubits(psi))
    phase = np.zeros(len(psi))
    for (j, k), g in zip(edges, gammas):
        phase += g * spins[:, j] * spins[:, k]
    return psi * np.exp(1j * phase)


def apply_mixer_unitary(psi: np.ndarray, mus: Sequence[float]) -> np.ndarray:
    """Product over qubits of ``exp(-i mu_j X_j)``."""
    n = num_qubits(psi)
    if len(mus) != n:
        raise ValueError(f"{len(mus)} mixer angles for {n} qubits")
    t = psi.reshape((2,) * n).copy()
    for j, mu in enumerate(mus):
        axis = n - 1 - j
        c, s = math.cos(mu), -1j * math.sin(mu)
        a = np.take(t, 0, axis=axis)
        b = np.take(t, 1, axis=axis)
        t = np.stack((c * a + s * b, s * a + c * b), axis=axis)
    return t.reshape(-1)


def evolve(problem: ProblemGraph, params: QaoaParams, budget: int = DEFAULT_MEMORY_BUDGET) -> np.ndarray:
    """Alternate edge-phase and mixer layers starting from the uniform state."""
    psi = uniform_superposition(problem.n, budget=budget)
    for gammas, mus in zip(params.gammas, params.mus):
        psi = apply_edge_phases(psi, problem.edges, gammas)
        psi = apply_mixer_unitary(psi, mus)
    return psi


def output_distribution(psi: np.ndarray) -> np.ndarray:
    return np.abs(psi) ** 2


def expectation(psi: np.ndarray, C: DiagonalObjective) -> float:
    if len(C.values) != len(psi):
        raise ValueError("objective and statevector dimensions differ")
    return float(output_distribution(psi) @ C.values)


def hamiltonian_energy(psi: np.ndarray, H: DiagonalObjective) -> float:
    """``<psi|H|psi>`` for a diagonal Hamiltonian; use ``-C`` as the energy dual."""
    return expectation(psi, H)


def zero_params(problem: ProblemGraph, depth: int) -> QaoaParams:
    return QaoaParams(tuple((0.0,) * problem.m for _ in range(depth)),
                      tuple((0.0,) * problem.n for _ in range(depth)))


# -- outer optimiser --------------------------------------------------------

_GOLDEN = (math.sqrt(5) - 1) / 2


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-9,
                       max_evals: int = 60) -> tuple[float, float, int]:
    """Maximise a unimodal ``f`` on ``[lo, hi]``; returns (x, f(x), evaluations)."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    evals = 2
    while b - a > tol and evals < max_evals:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
        evals += 1
    return (c, fc, evals) if fc >= fd else (d, fd, evals)


class _Budgeted:
    """Counts objective evaluations and remembers the best point seen."""

    def __init__(self, problem: ProblemGraph, budget: int):
        self.problem = problem
        self.C = problem_objective(problem)
        self.budget = budget
        self.used = 0
        self.best_value = -math.inf
        self.best_x: Optional[np.ndarray] = None

    @property
    def exhausted(self) -> bool:
        return self.used >= self.budget

    def __call__(self, x: np.ndarray) -> float:
        if self.exhausted:
            return -math.inf
        self.used += 1
        u = len(x) // (self.problem.m + self.problem.n)
        value = expectation(evolve(self.problem, _unpack(x, self.problem, u)), self.C)
        if value > self.best_value:
            self.best_value, self.best_x = value, x.copy()
        return value


def _unpack(x: np.ndarray, problem: ProblemGraph, u: int) -> QaoaParams:
    m, n = problem.m, problem.n
    rows = x.reshape(u, m + n)
    return QaoaParams.from_arrays(rows[:, :m], rows[:, m:])


def maximize_objective(problem: ProblemGraph, u: int = 1, budget: int = 4000, seed: int = 0,
                       grid_points: int = 16) -> tuple[QaoaParams, float]:
    """Search the angle collections for the largest objective expectation.

    The start point is all-zero angles. A coarse grid over one shared
    (gamma, mu) pair per layer seeds the search, layer by layer; then
    golden-section line searches refine single angles and layer-shared angle
    groups in seeded random order while the bracket shrinks. Deterministic for
    a fixed ``seed``.
    """
    if u < 1:
        raise ValueError("depth must be >= 1")
    m, n = problem.m, problem.n
    dim = u * (m + n)
    f = _Budgeted(problem, budget)
    x = np.zeros(dim)
    f(x)

    grid = np.linspace(0.0, math.pi, grid_points)
    for layer in range(u):
        base = f.best_x.copy()
        for g in grid:
            for mu in grid:
                trial = base.copy()
                row = trial[layer * (m + n):(layer + 1) * (m + n)]
                row[:m], row[m:] = g, mu
                f(trial)
                if f.exhausted:
                    break
            if f.exhausted:
                break

    # search directions: single angles, then per-layer shared gamma / mu groups
    directions = [np.eye(dim)[i] for i in range(dim)]
    for layer in range(u):
        for lo_, hi_ in ((0, m), (m, m + n)):
            if hi_ - lo_ > 1:
                v = np.zeros(dim)
                v[layer * (m + n) + lo_:layer * (m + n) + hi_] = 1.0
                directions.append(v)

    rng = np.random.default_rng(seed)
    width = math.pi / max(grid_points - 1, 1)
    while not f.exhausted and width > 1e-9:
        start = f.best_value
        for i in rng.permutation(len(directions)):
            if f.exhausted:
                break
            x0, v = f.best_x.copy(), directions[i]
            active = v > 0
            # keep every angle of the group inside [0, pi]
            lo = max(-width, float(np.max(-x0[active])))
            hi = min(width, float(np.min(math.pi - x0[active])))
            if hi - lo <= 1e-12:
                continue
            golden_section_max(lambda t: f(np.clip(x0 + t * v, 0.0, math.pi)), lo, hi,
                               tol=width * 1e-3, max_evals=40)
        if f.best_value - start < 1e-12:
            width /= 4

    return _unpack(f.best_x, problem, u), float(f.best_value)
