"""
Checking the guarantees by simulation
=====================================

Three small Monte-Carlo runs, each with its own error bar.
"""

# %%
import numpy as np

from mirecourse.models import LinearModel
from mirecourse.theory import (sample_size, segment_actions, verify_prop_growth, verify_prop_sample,
                               verify_prop_upper)

# Gap between the action for a mean-imputed vector and the true optimum.
print(verify_prop_upper(10_000, dim=3, seed=0).summary())
print(verify_prop_upper(2000, dim=3, seed=0, imputer="knn").summary())

# A coefficient of zero on the hidden feature makes the gap vanish exactly.
r = verify_prop_upper(1000, dim=3, seed=0, beta=[0.0, 1.0, 1.0])
print("irrelevant feature hidden:", r.estimate, r.bound)

# %%
# How many candidates put one within eps of the truth with probability 1 - delta?
for d_star in (1, 2, 3):
    print(f"D*={d_star}: N={sample_size(0.25, 0.05, d_star)}")
print(verify_prop_sample(0.25, 0.05, 2, trials=1000, seed=0).summary())

# %%
# Along a segment of actions each candidate flips at most once.
model = LinearModel(np.array([1.0, 2.0, -1.0]), -1.0)
family = segment_actions(3.0 * model.coef / np.linalg.norm(model.coef))
for N in (5, 20, 100):
    print(verify_prop_growth(model, family, N, trials=100, seed=0).summary())
