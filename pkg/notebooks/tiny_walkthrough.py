# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: light
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# # Annealing the two-gate circuit
#
# Two 2x2 gates on separate layers joined by one net, encoding a single-edge
# cut problem. The run below anneals placement, routing and the angles together.

# + {"tags": ["parameters"]}
iterations = 2000
seed = 7

# +
from collections import Counter
from pathlib import Path

import numpy as np

from qtam.annealer import qtam_run
from qtam.fileio import front_csv, load_config, load_spec

root = Path(__file__).resolve().parent.parent if "__file__" in globals() else Path("..")
spec = load_spec(root / "data" / "tiny.json")
cfg, _ = load_config(root / "data" / "default_config.json")
print(spec.grid, spec.num_layers, [g.id for g in spec.gates])

# +
from dataclasses import replace

sizes = []
result = qtam_run(spec, replace(cfg, iterations=iterations, seed=seed),
                  callback=lambda i, a: sizes.append(len(a)))
print(Counter(row.case for row in result.trace))
print("archive size over time:", sizes[::200])

# -
# Each archive member trades area and wire area against the cut expectation.
print(front_csv(list(result.archive)))

# +
best = max(result.archive, key=lambda e: e.expectation)
print("best expectation", best.expectation)
print("angles", best.solution.qaoa)
print("distribution", np.round(best.distribution, 4))
