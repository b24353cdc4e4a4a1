"""
A batch run at toy size
=======================

The same protocol as the ``experiment`` command: train on 75% of a synthetic
table, hide two features of each rejected test row, and compare methods
against the hidden truth. Twenty instances keep it under a minute.
"""

# %%
from mirecourse.evaluation import ExperimentConfig, run_experiment

cfg = ExperimentConfig(max_instances=20, sweep=(0.5, 0.7, 0.9), sweep_n=10)
report = run_experiment(cfg)

# plain_ar sees the complete row, so it is the cost floor rather than a competitor
print(f"{'method':16s} valid  cost")
for name, agg in report.aggregates.items():
    print(f"{name:16s} {agg['valid_ratio']:.2f}  {agg['mean_cost']:.3f}")

# %%
# exact solves on the first ten candidates, one rho at a time
for s in report.sweep_summary():
    print(f"rho {s['rho']:.2f}: mean cost {s['mean_cost']:.3f} over {s['n']} instances")
