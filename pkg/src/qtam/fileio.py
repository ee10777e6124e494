"""Circuit and run-configuration documents (JSON) and report writers."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Any, Optional, Sequence

import jsonschema
import numpy as np

from .annealer import DEFAULT_MOVE_WEIGHTS, AnnealerConfig, TemperatureSchedule
from .circuit import (MOVE_KINDS, Blockage, CircuitSpec, GateSpec, Net, Port, PortRef, ProblemGraph,
                      Solution)
from .objectives import N_OBJ, EvalConfig, Evaluation, scalarized_cost
from .qaoa import maximize_objective
from .wires import DeviceConstants

FORMAT_VERSION = 1


class SchemaError(ValueError):
    """The document does not match its schema."""


_NUM = {"type": "number"}
_INT = {"type": "integer"}
_PAIR = {"type": "array", "items": _INT, "minItems": 2, "maxItems": 2}

_PORT_REF = {
    "type": "object",
    "required": ["gate", "port"],
    "additionalProperties": False,
    "properties": {"gate": {"type": "string"}, "port": _INT, "layer": _INT,
                   "amplitude": {"type": ["number", "null"]}},
}

SPEC_SCHEMA = {
    "type": "object",
    "required": ["format", "grid", "layers", "gates", "nets", "problem_graph"],
    "additionalProperties": False,
    "properties": {
        "format": {"const": FORMAT_VERSION},
        "grid": {"type": "object", "required": ["width", "height"], "additionalProperties": False,
                 "properties": {"width": _INT, "height": _INT}},
        "layers": _INT,
        "num_inputs": _INT,
        "d": _INT,
        "symmetry_axis": {"type": ["number", "null"]},
        "gates": {"type": "array", "items": {
            "type": "object",
            "required": ["id", "width", "height", "ports"],
            "additionalProperties": False,
            "properties": {
                "id": {"type": "string"}, "width": _INT, "height": _INT,
                "ports": {"type": "array", "items": _PAIR},
                "rounds": {"type": "array", "items": _INT},
                "symmetry": {"enum": ["free", "self", "pair"]},
                "partner": {"type": ["string", "null"]},
            }}},
        "nets": {"type": "array", "items": {
            "type": "object",
            "required": ["id", "sources", "sinks"],
            "additionalProperties": False,
            "properties": {
                "id": {"type": "string"},
                "sources": {"type": "array", "items": _PORT_REF},
                "sinks": {"type": "array", "items": _PORT_REF},
                "subnets": {"type": "array", "items": {"type": "array", "items": _INT}},
                "problem_edge": {"oneOf": [_PAIR, {"type": "null"}]},
            }}},
        "blockages": {"type": "array", "items": {
            "type": "object", "required": ["layer", "cells"], "additionalProperties": False,
            "properties": {"layer": _INT, "cells": {"type": "array", "items": _PAIR}}}},
        "problem_graph": {"type": "object", "required": ["n", "edges"], "additionalProperties": False,
                          "properties": {"n": _INT, "edges": {"type": "array", "items": _PAIR}}},
        "reference": {"oneOf": [
            {"type": "null"},
            {"type": "object", "required": ["distribution"], "additionalProperties": False,
             "properties": {"distribution": {"type": "array", "items": _NUM}}},
            {"type": "object", "required": ["depth"], "additionalProperties": False,
             "properties": {"depth": _INT, "budget": _INT, "seed": _INT}},
        ]},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "iterations": {"type": "integer", "minimum": 0},
        "seed": _INT,
        "T_f_max": {"type": "number", "exclusiveMinimum": 0},
        "T_g_max": {"type": "number", "exclusiveMinimum": 0},
        "T_c_max": {"type": "number", "exclusiveMinimum": 0},
        "R": {"type": "number", "exclusiveMinimum": 0},
        "k": {"type": "number", "exclusiveMinimum": 0},
        "archive_size": {"type": "integer", "minimum": 1},
        "initial_size": {"type": "integer", "minimum": 1},
        "qaoa_depth": {"type": "integer", "minimum": 1},
        "move_weights": {"type": "object", "additionalProperties": False,
                         "properties": {k: {"type": "number", "minimum": 0} for k in MOVE_KINDS}},
        "alpha": {"type": "array", "items": {"type": "number", "minimum": 0},
                  "minItems": N_OBJ, "maxItems": N_OBJ},
        "epsilon": {"type": "number", "minimum": 0},
        "f_l": {"type": "number", "minimum": 0},
        "device": {"type": "object", "additionalProperties": False, "properties": {
            "j_max": {"type": "number", "exclusiveMinimum": 0},
            "h_nom": {"type": "number", "exclusiveMinimum": 0},
            "r_0": {"type": "number", "exclusiveMinimum": 0},
            "chi_phi": {"type": "number", "exclusiveMinimum": 0},
            "delta_0": {"type": "number", "minimum": 0},
            "t_ref": {"type": "string"},
        }},
    },
}


def _check_schema(doc: Any, schema: dict, what: str) -> None:
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise SchemaError(f"{what}: {where}: {e.message}") from None


def read_json(path: str | Path) -> Any:
    """Raises OSError when unreadable and SchemaError when not JSON."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON ({e})") from None


# -- circuit documents ------------------------------------------------------

def _port_ref(d: dict) -> PortRef:
    return PortRef(d["gate"], d["port"], d.get("layer", 1), d.get("amplitude"))


def spec_from_dict(doc: dict) -> CircuitSpec:
    _check_schema(doc, SPEC_SCHEMA, "circuit spec")
    gates = tuple(GateSpec(g["id"], g["width"], g["height"], tuple(Port(*p) for p in g["ports"]),
                           tuple(g.get("rounds", [1])), g.get("symmetry", "free"), g.get("partner"))
                  for g in doc["gates"])
    nets = tuple(Net(n["id"], tuple(_port_ref(r) for r in n["sources"]), tuple(_port_ref(r) for r in n["sinks"]),
                     tuple(tuple(s) for s in n.get("subnets", [])),
                     tuple(n["problem_edge"]) if n.get("problem_edge") is not None else None)
                 for n in doc["nets"])
    blockages = tuple(Blockage(b["layer"], frozenset(tuple(c) for c in b["cells"]))
                      for b in doc.get("blockages", []))
    pg = doc["problem_graph"]
    problem = ProblemGraph(pg["n"], tuple(tuple(e) for e in pg["edges"]))
    ref = doc.get("reference")
    distribution = None
    if ref is not None and "distribution" in ref:
        distribution = tuple(float(p) for p in ref["distribution"])
    spec = CircuitSpec(gates, nets, doc["layers"], (doc["grid"]["width"], doc["grid"]["height"]), problem,
                       blockages, doc.get("num_inputs"), doc.get("d", 2), distribution, doc.get("symmetry_axis"))
    if ref is not None and "depth" in ref:
        distribution = reference_distribution(problem, ref["depth"], ref.get("budget", 4000), ref.get("seed", 0))
        spec = CircuitSpec(spec.gates, spec.nets, spec.num_layers, spec.grid, spec.problem, spec.blockages,
                           spec.num_inputs, spec.d, distribution, spec.symmetry_axis)
    return spec


def reference_distribution(problem: ProblemGraph, depth: int, budget: int = 4000, seed: int = 0) -> tuple:
    """Output distribution of the best reference circuit found for ``problem``."""
    from .qaoa import evolve, output_distribution

    params, _ = maximize_objective(problem, depth, budget, seed)
    return tuple(float(p) for p in output_distribution(evolve(problem, params)))


def load_spec(path: str | Path) -> CircuitSpec:
    return spec_from_dict(read_json(path))


def spec_to_dict(spec: CircuitSpec) -> dict:
    def ref(r: PortRef) -> dict:
        out = {"gate": r.gate, "port": r.port, "layer": r.layer}
        if r.amplitude is not None:
            out["amplitude"] = r.amplitude
        return out

    doc = {
        "format": FORMAT_VERSION,
        "grid": {"width": spec.grid[0], "height": spec.grid[1]},
        "layers": spec.num_layers,
        "num_inputs": spec.num_inputs,
        "d": spec.d,
        "symmetry_axis": spec.symmetry_axis,
        "gates": [{"id": g.id, "width": g.width, "height": g.height, "ports": [[p.dx, p.dy] for p in g.ports],
                   "rounds": list(g.rounds), "symmetry": g.symmetry, "partner": g.partner} for g in spec.gates],
        "nets": [{"id": n.id, "sources": [ref(r) for r in n.sources], "sinks": [ref(r) for r in n.sinks],
                  "subnets": [list(s) for s in n.subnets],
                  "problem_edge": list(n.problem_edge) if n.problem_edge is not None else None}
                 for n in spec.nets],
        "blockages": [{"layer": b.layer, "cells": sorted([list(c) for c in b.cells])} for b in spec.blockages],
        "problem_graph": {"n": spec.problem.n, "edges": [list(e) for e in spec.problem.edges]},
        "reference": None if spec.reference_distribution is None
        else {"distribution": list(spec.reference_distribution)},
    }
    return doc


# -- run configuration ------------------------------------------------------

def config_from_dict(doc: dict) -> AnnealerConfig:
    _check_schema(doc, CONFIG_SCHEMA, "run config")
    sched = dict(rate=doc.get("R", 1.0), k=doc.get("k", 100.0))
    weights = dict(DEFAULT_MOVE_WEIGHTS)
    weights.update(doc.get("move_weights", {}))
    if not any(w > 0 for w in weights.values()):
        raise SchemaError("run config: move_weights: at least one weight must be positive")
    dev = doc.get("device", {})
    device = DeviceConstants(**{k: dev[k] for k in ("j_max", "h_nom", "r_0", "chi_phi", "delta_0", "t_ref")
                                if k in dev})
    ev = EvalConfig(f_l=doc.get("f_l", 2.0), epsilon=doc.get("epsilon", 0.05),
                    alpha=tuple(doc.get("alpha", (1.0,) * N_OBJ)), device=device)
    return AnnealerConfig(
        iterations=doc.get("iterations", 1000),
        t_f=TemperatureSchedule(doc.get("T_f_max", 1.0), **sched),
        t_g=TemperatureSchedule(doc.get("T_g_max", 1.0), **sched),
        t_c=TemperatureSchedule(doc.get("T_c_max", 1.0), **sched),
        archive_size=doc.get("archive_size", 50),
        initial_size=doc.get("initial_size", 10),
        seed=doc.get("seed", 0),
        qaoa_depth=doc.get("qaoa_depth", 1),
        move_weights=weights,
        eval=ev,
    )


def load_config(path: Optional[str | Path]) -> tuple[AnnealerConfig, dict]:
    doc = {} if path is None else read_json(path)
    if not isinstance(doc, dict):
        raise SchemaError("run config: top level must be an object")
    return config_from_dict(doc), doc


def config_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


# -- reports ----------------------------------------------------------------

FRONT_HEADER = ("f1_area", "f2_wire_area", "f3_neg_expectation", "f4_inputs", "f5_measurements",
                "g_s", "c_s")


def _front_order(evals: Sequence[Evaluation]) -> list[Evaluation]:
    return sorted(evals, key=lambda e: (tuple(e.f), e.g_s, e.c_s, repr(e.solution.placements),
                                        repr(e.solution.qaoa)))


def front_csv(evals: Sequence[Evaluation]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FRONT_HEADER)
    for e in _front_order(evals):
        w.writerow([repr(float(v)) for v in e.f] + [repr(e.g_s), repr(e.c_s)])
    return buf.getvalue()


def solution_to_dict(spec: CircuitSpec, s: Solution) -> dict:
    return {
        "placements": {g.id: [{"x": p.x, "y": p.y, "rotation": p.rotation, "layer": p.layer} for p in insts]
                       for g, insts in zip(spec.gates, s.placements)},
        "routes": {n.id: None if r is None else {
            "reachable": r.reachable, "cost": r.cost if math.isfinite(r.cost) else None,
            "overlap": r.overlap, "separation": list(r.separation) if r.separation else None,
            "path": [list(v) for v in r.path]} for n, r in zip(spec.nets, s.routes)},
        "qaoa": {"gammas": [list(row) for row in s.qaoa.gammas], "mus": [list(row) for row in s.qaoa.mus]},
        "active_inputs": s.active_inputs,
        "measurement": {"rounds": s.measurement_rounds, "gates": s.measurement_gates},
    }


def best_scalarized(evals: Sequence[Evaluation], alpha: Sequence[float]) -> Evaluation:
    """Feasible members first, then lowest weighted sum."""
    return min(_front_order(evals), key=lambda e: (not e.feasible, scalarized_cost(e.f, alpha)))


def build_report(spec: CircuitSpec, evals: Sequence[Evaluation], cfg: AnnealerConfig, cfg_doc: dict,
                 trace_summary: dict, complexity: dict) -> dict:
    from .dominance import relative_entropy

    best = best_scalarized(evals, cfg.eval.alpha)
    entropy = None
    if spec.reference_distribution is not None:
        entropy = relative_entropy(spec.reference_distribution, best.distribution)
    return {
        "format": FORMAT_VERSION,
        "seed": cfg.seed,
        "config_hash": config_hash(cfg_doc),
        "best": {
            "objectives": [float(v) for v in best.f],
            "scalarized_cost": scalarized_cost(best.f, cfg.eval.alpha),
            "g_s": best.g_s, "c_s": best.c_s,
            "expectation": best.expectation,
            "relative_entropy_bits": entropy,
            "solution": solution_to_dict(spec, best.solution),
        },
        "front": [{"objectives": [float(v) for v in e.f], "g_s": e.g_s, "c_s": e.c_s}
                  for e in _front_order(evals)],
        "trace": trace_summary,
        "complexity": complexity,
    }


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"not serialisable: {type(v)}")
