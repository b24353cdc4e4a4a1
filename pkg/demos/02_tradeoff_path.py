"""
How much does extra confidence cost?
====================================

Raising the required share of valid candidates can only shrink the set of
acceptable actions, so cost goes up in steps. The path routine visits every
step: each new threshold sits just above the validity the previous action
already reached.
"""

# %%
import numpy as np

from mirecourse import synthetic
from mirecourse.actions import CostSpec, build_grid
from mirecourse.data import MCAR, attach_quantiles, inject_missing, split
from mirecourse.imputation import fit_imputer, sample_candidates
from mirecourse.models import predict, train
from mirecourse.recourse import path

data = synthetic.correlated(2000, seed=0)
train_set, test_set = split(data, 0.25, seed=0)
clf = train("logistic", train_set)
metas = attach_quantiles(train_set)
state = fit_imputer(train_set)

# first rejected test row, with two features hidden at random
x = next(r for r in test_set.rows if predict(clf, r) == -1)
xt = inject_missing(x, MCAR(2), seed=3)
print("hidden:", [metas[d].name for d in xt.missing_set])

# %%
grid = build_grid(xt, metas, 10, CostSpec.tlps(metas))
S = sample_candidates(xt, "chained_draws", state, 20, seed=3)
p = path(xt, clf, grid, S)

print(" rho    cost   validity")
for rho, a, c, v in p.rows():
    print(f"{rho:5.2f}  {c:6.3f}  {v:5.2f}")

# %%
# Costs never fall, thresholds strictly rise, and there are at most N steps.
assert np.all(np.diff(p.costs) >= -1e-12) and np.all(np.diff(p.rhos) > 0) and len(p) <= len(S)
