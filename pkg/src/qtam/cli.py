"""Command line entry point: ``qtam {optimize,verify,bench,qaoa,route}``.

Exit codes: 0 ok, 1 spec fails validation, 2 file cannot be read or
written, 3 malformed spec or config, 4 statevector exceeds the memory budget.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections import Counter
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench
from .annealer import random_solution, run_chains
from .circuit import ProblemGraph, validate
from .fileio import (SchemaError, build_report, dumps_report, front_csv, load_config, load_spec,
                     solution_to_dict)
from .objectives import N_OBJ
from .qaoa import CapacityError, maximize_objective
from .router import GridGraph, net_pins, route_net

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_SCHEMA, EXIT_CAPACITY = 0, 1, 2, 3, 4

log = logging.getLogger("qtam")


class ValidationFailed(Exception):
    pass


def _load_valid_spec(path: str):
    spec = load_spec(path)
    problems = validate(spec)
    if problems:
        raise ValidationFailed("\n".join(problems))
    return spec


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    p = out / name
    p.write_text(text)
    return p


def cmd_optimize(args) -> int:
    spec = _load_valid_spec(args.spec)
    cfg, doc = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
        doc = {**doc, "seed": args.seed}
    if args.iterations is not None:
        cfg = replace(cfg, iterations=args.iterations)
        doc = {**doc, "iterations": args.iterations}
    archive, results = run_chains(spec, cfg, args.chains)
    evals = list(archive)

    cases = Counter(row.case for r in results for row in r.trace)
    probs = [row.probability for r in results for row in r.trace if row.case in ("a", "b", "e")]
    trace_summary = {
        "iterations": sum(len(r.trace) for r in results),
        "chains": args.chains,
        "cases": dict(sorted(cases.items())),
        "mean_acceptance_probability": float(np.mean(probs)) if probs else None,
        "final_archive_size": len(archive),
    }
    counters = Counter()
    for r in results:
        counters.update(r.counters)
    params = bench.ComplexityParams(3, max(cfg.iterations, 1), cfg.archive_size, N_OBJ)
    complexity = {
        "params": {"n_d": params.n_d, "n_it": params.n_it, "pop": params.pop, "n_obj": params.n_obj},
        "qtam": bench.qtam_ops(params), "nsga2": bench.nsga2_ops(params),
        "nsga2_opt": bench.nsga2_opt_ops(params),
        "measured": bench.measured_ops(counters, params),
    }
    report = build_report(spec, evals, cfg, doc, trace_summary, complexity)
    out = Path(args.out)
    _write(out, "report.json", dumps_report(report))
    _write(out, "front.csv", front_csv(evals))
    _write(out, "complexity.csv", bench.sweep_csv([(params.n_it, params.pop, complexity["qtam"],
                                                     complexity["nsga2"], complexity["nsga2_opt"])]))
    best = report["best"]
    print(f"archive={len(evals)} best expectation={best['expectation']:.6f} "
          f"cost={best['scalarized_cost']:.6f} -> {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = load_spec(args.spec)
    problems = validate(spec)
    if problems:
        for p in problems:
            print(p)
        return EXIT_INVALID
    print("OK")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.sweep:
        rows = bench.sweep(range(1, args.n_it + 1), range(1, args.pop + 1), args.n_d, args.n_obj)
    else:
        p = bench.ComplexityParams(args.n_d, args.n_it, args.pop, args.n_obj)
        rows = [(p.n_it, p.pop, bench.qtam_ops(p), bench.nsga2_ops(p), bench.nsga2_opt_ops(p))]
    text = bench.sweep_csv(rows)
    if args.out:
        path = _write(Path(args.out), "complexity.csv", text)
        n_it, pop, q, n, o = rows[-1]
        print(f"wrote {len(rows)} rows to {path}; ({n_it}, {pop}): qtam={q:.2f} nsga2={n:.2f} nsga2_opt={o:.2f}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _parse_edges(text: str) -> tuple[tuple[int, int], ...]:
    edges = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            a, b = (int(v) for v in part.split("-"))
        except ValueError:
            raise SchemaError(f"bad edge {part!r}; expected e.g. 0-1") from None
        edges.append((a, b))
    if not edges:
        raise SchemaError("no edges given")
    return tuple(edges)


def cmd_qaoa(args) -> int:
    edges = _parse_edges(args.edges)
    n = max(max(e) for e in edges) + 1
    problem = ProblemGraph(n, edges)
    spec_problems = [f"self-loop on vertex {a}" for a, b in edges if a == b]
    if spec_problems:
        print("\n".join(spec_problems))
        return EXIT_INVALID
    params, value = maximize_objective(problem, args.depth, args.budget, args.seed)
    print(json.dumps({"n": n, "edges": [list(e) for e in edges], "depth": args.depth,
                      "expectation": value, "gammas": [list(r) for r in params.gammas],
                      "mus": [list(r) for r in params.mus]}, sort_keys=True))
    return EXIT_OK


def cmd_route(args) -> int:
    spec = _load_valid_spec(args.spec)
    cfg, _ = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    s = random_solution(spec, np.random.default_rng(seed), cfg.qaoa_depth)
    nets = [n for n in spec.nets if args.net is None or n.id == args.net]
    if not nets:
        raise SchemaError(f"no net named {args.net!r}")
    g = GridGraph.from_spec(spec, cfg.eval.f_l)
    out = {}
    placed = solution_to_dict(spec, s)["placements"]
    for net in nets:
        src, others = net_pins(spec, s, net)
        r = route_net(g, src, others)
        out[net.id] = {"reachable": r.reachable, "cost": r.cost if r.reachable else None,
                       "overlap": r.overlap, "separation": list(r.separation) if r.separation else None,
                       "path": [list(v) for v in r.path]}
    print(json.dumps({"seed": seed, "placements": placed, "routes": out}, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qtam", description="Layout annealing for gate-model quantum circuits.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="anneal a circuit spec and write report.json, front.csv")
    p.add_argument("--spec", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--out", default="qtam_out")
    p.add_argument("--chains", type=int, default=1)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("verify", help="validate a circuit spec")
    p.add_argument("--spec", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="closed-form operation counts")
    p.add_argument("--sweep", action="store_true", help="every (n_it, pop) up to the given maxima")
    p.add_argument("--n-it", type=int, default=100)
    p.add_argument("--pop", type=int, default=500)
    p.add_argument("--n-obj", type=int, default=5)
    p.add_argument("--n-d", type=int, default=3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("qaoa", help="maximise the objective expectation of a graph")
    p.add_argument("--edges", required=True, help='comma-separated, e.g. "0-1,1-2"')
    p.add_argument("--depth", type=int, default=1)
    p.add_argument("--budget", type=int, default=4000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_qaoa)

    p = sub.add_parser("route", help="route nets of a spec on a seeded random placement")
    p.add_argument("--spec", required=True)
    p.add_argument("--config")
    p.add_argument("--net")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_route)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("QTAM_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationFailed as e:
        print(f"invalid spec:\n{e}", file=sys.stderr)
        return EXIT_INVALID
    except SchemaError as e:
        print(f"schema error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except CapacityError as e:
        print(f"capacity error: {e}", file=sys.stderr)
        return EXIT_CAPACITY
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
