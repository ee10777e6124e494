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

# # Operation counts
#
# Closed-form counts for the annealer against a population method with
# quadratic and with n log n nondominated sorting.

# + {"tags": ["parameters"]}
n_d, n_obj = 3, 5

# +
from qtam.bench import ComplexityParams, nsga2_ops, nsga2_opt_ops, qtam_ops, sweep

p = ComplexityParams(n_d, 100, 500, n_obj)
print(f"qtam      {qtam_ops(p):>14,.2f}")
print(f"nsga2     {nsga2_ops(p):>14,.2f}")
print(f"nsga2_opt {nsga2_opt_ops(p):>14,.2f}")
print("ratio", qtam_ops(p) / nsga2_ops(p))

# -
# The quadratic term dominates once the population grows past a few dozen.
for n_it, pop, q, n, o in sweep([100], [1, 10, 50, 100, 250, 500], n_d, n_obj):
    print(f"{pop:>4} {q:>14,.0f} {n:>14,.0f} {o:>14,.0f}")

# +
from qtam.annealer import AnnealerConfig, qtam_run
from qtam.bench import measured_ops
from qtam.fileio import load_spec
from pathlib import Path

root = Path(__file__).resolve().parent.parent if "__file__" in globals() else Path("..")
spec = load_spec(root / "data" / "tiny.json")
cfg = AnnealerConfig(iterations=100, seed=1, archive_size=10)
run = qtam_run(spec, cfg)
print(measured_ops(run.counters, ComplexityParams(n_d, 100, cfg.archive_size, n_obj)))
