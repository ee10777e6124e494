"""Closed-form operation counts and the measured counters of a run."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

CSV_HEADER = ("n_it", "pop", "qtam", "nsga2", "nsga2_opt")


@dataclass(frozen=True)
class ComplexityParams:
    n_d: int = 3
    n_it: int = 100
    pop: int = 500
    n_obj: int = 5

    def __post_init__(self):
        for name in ("n_d", "n_it", "pop", "n_obj"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


def qtam_ops(p: ComplexityParams) -> float:
    return p.n_d * p.n_it * p.pop * (p.n_obj + math.log2(p.pop))


def nsga2_ops(p: ComplexityParams) -> float:
    return float(p.n_it * p.n_obj * p.pop**2)


def nsga2_opt_ops(p: ComplexityParams) -> float:
    return p.n_it * p.n_obj * p.pop * math.log2(p.pop)


def sweep(n_its: Iterable[int] = range(1, 101), pops: Iterable[int] = range(1, 501),
          n_d: int = 3, n_obj: int = 5) -> list[tuple[int, int, float, float, float]]:
    rows = []
    pops = list(pops)
    for n_it in n_its:
        for pop in pops:
            p = ComplexityParams(n_d, n_it, pop, n_obj)
            rows.append((n_it, pop, qtam_ops(p), nsga2_ops(p), nsga2_opt_ops(p)))
    return rows


def sweep_csv(rows: Sequence[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for n_it, pop, q, n, o in rows:
        w.writerow((n_it, pop, repr(float(q)), repr(float(n)), repr(float(o))))
    return buf.getvalue()


def measured_ops(counters: Mapping[str, int], params: ComplexityParams) -> dict:
    """Counters of a run next to the closed-form bound for the same parameters."""
    return {
        "dominance": int(counters.get("dominance", 0)),
        "archive_comparisons": int(counters.get("archive_comparisons", 0)),
        "evaluations": int(counters.get("evaluations", 0)),
        "bound": qtam_ops(params),
    }
