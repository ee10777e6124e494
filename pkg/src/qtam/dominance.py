"""Relative entropy and the three dominance relations used by the annealer.

Violation sums are non-positive; zero means feasible. A solution "dominates"
another on a violation sum when it is feasible and the other is not, or when
both are infeasible and it is closer to zero.
"""
from __future__ import annotations

import enum
from typing import Protocol, Sequence

import numpy as np

ETA = 1e-12  # floor applied to Q before the log ratio


class Dominance(enum.Enum):
    X_DOMINATES = "x"
    Y_DOMINATES = "y"
    NONDOMINATED = "none"

    def flipped(self) -> "Dominance":
        if self is Dominance.X_DOMINATES:
            return Dominance.Y_DOMINATES
        if self is Dominance.Y_DOMINATES:
            return Dominance.X_DOMINATES
        return self


class Evaluated(Protocol):
    f: np.ndarray
    g_s: float
    c_s: float


def relative_entropy(P: Sequence[float], Q: Sequence[float], eta: float = ETA) -> float:
    """``D(P || Q)`` in bits; zero-probability terms of P contribute nothing."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape != Q.shape:
        raise ValueError(f"distribution lengths differ: {P.shape} vs {Q.shape}")
    for name, v in (("P", P), ("Q", Q)):
        if abs(v.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} does not sum to 1 (sum={v.sum()})")
    support = P > 0
    q = np.maximum(Q[support], eta)
    d = float(np.sum(P[support] * np.log2(P[support] / q)))
    # rounding can leave tiny negatives when P == Q
    return max(d, 0.0)


def _violation_rule(x: float, y: float) -> tuple[float, Dominance]:
    d = x - y
    if (x < 0 and y < 0 and x > y) or (x == 0 and y < 0):
        return d, Dominance.X_DOMINATES
    if (x < 0 and y < 0 and x < y) or (x < 0 and y == 0):
        return d, Dominance.Y_DOMINATES
    return d, Dominance.NONDOMINATED


def closeness_dominance(c_x: float, c_y: float) -> tuple[float, Dominance]:
    """Distribution-closeness dominance on the violation sums ``c_s``."""
    return _violation_rule(c_x, c_y)


def constraint_dominance(g_x: float, g_y: float) -> tuple[float, Dominance]:
    """Constraint dominance on the violation sums ``g_s``."""
    return _violation_rule(g_x, g_y)


def objective_dominance(f_x: Sequence[float], f_y: Sequence[float],
                        ranges: Sequence[float] | None = None) -> tuple[float, Dominance]:
    """Range-normalised product of objective gaps, plus the Pareto outcome.

    Objectives that are equal are skipped in the product; with no differing
    objective the product is empty and equals 1.
    """
    f_x = np.asarray(f_x, dtype=float)
    f_y = np.asarray(f_y, dtype=float)
    if f_x.shape != f_y.shape:
        raise ValueError("objective vectors differ in length")
    R = np.ones_like(f_x) if ranges is None else np.asarray(ranges, dtype=float)
    diff = f_x != f_y
    d = float(np.prod(np.abs(f_x[diff] - f_y[diff]) / R[diff]))
    if np.all(f_x <= f_y) and np.any(diff):
        return d, Dominance.X_DOMINATES
    if np.all(f_y <= f_x) and np.any(diff):
        return d, Dominance.Y_DOMINATES
    return d, Dominance.NONDOMINATED


def pareto_check(x: Evaluated, y: Evaluated) -> Dominance:
    """Constrained dominance: closeness first, then constraints, then objectives."""
    outcome = closeness_dominance(x.c_s, y.c_s)[1]
    if outcome is not Dominance.NONDOMINATED:
        return outcome
    outcome = constraint_dominance(x.g_s, y.g_s)[1]
    if outcome is not Dominance.NONDOMINATED:
        return outcome
    return objective_dominance(x.f, y.f)[1]


def dominates(x: Evaluated, y: Evaluated) -> bool:
    return pareto_check(x, y) is Dominance.X_DOMINATES
