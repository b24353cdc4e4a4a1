"""Synthetic generators used by the experiments, demos and acceptance tests.

``correlated`` draws six correlated features with a logistic label.
``grant`` is an income/age table where the favourable outcome (a means-tested
grant) becomes less likely as income grows and income rises with age.
``loan`` is a loan-approval table where income helps; ``loan_instance``
builds an applicant whose income is well below the population mean.
"""

from __future__ import annotations

import numpy as np

from ._seeding import rng as _rng
from .data import Dataset, FeatureMeta


def _labels(gen, logit):
    # logistic noise keeps the classes overlapping
    u = gen.uniform(size=len(logit))
    return np.where(logit + np.log(u / (1.0 - u)) * 0.5 > 0, 1, -1)


def correlated(n: int = 2000, seed: int = 0) -> Dataset:
    """Six features on [0, 10] with correlation 0.6^|i-j|; x6 is immutable."""
    gen = _rng(seed, 101)
    D = 6
    idx = np.arange(D)
    cov = 0.6 ** np.abs(idx[:, None] - idx[None, :])
    Z = gen.multivariate_normal(np.zeros(D), cov, size=n, method="cholesky")
    X = np.clip(5.0 + 1.6 * Z, 0.0, 10.0)
    w = np.array([1.0, -0.8, 0.9, 0.7, -0.6, 0.8])
    y = _labels(gen, 1.4 * (Z @ w) - 0.3)
    feats = tuple(
        FeatureMeta(f"x{d + 1}", "continuous", 0.0, 10.0, "immutable" if d == D - 1 else "free")
        for d in range(D)
    )
    return Dataset(feats, X, y, "outcome")


GRANT_FEATURES = ("age", "income", "study_hours", "gpa", "volunteer_hours", "household_size")


def grant(n: int = 2000, seed: int = 0) -> Dataset:
    """Income/age table: age is immutable, income hurts the favourable label."""
    gen = _rng(seed, 102)
    age = np.clip(gen.normal(45.0, 12.0, n), 18.0, 80.0)
    income = np.clip(15.0 + 1.2 * (age - 18.0) + gen.normal(0.0, 10.0, n), 0.0, 150.0)
    study = np.clip(gen.normal(15.0, 5.0, n) - 0.05 * (income - 50.0), 0.0, 40.0)
    gpa = np.clip(gen.normal(2.9, 0.5, n) + 0.02 * (study - 15.0), 0.0, 4.0)
    volunteer = np.clip(gen.normal(8.0, 4.0, n), 0.0, 30.0)
    household = np.clip(np.round(gen.normal(3.0, 1.3, n)), 1.0, 8.0)
    logit = (-0.09 * (income - 48.0) + 0.12 * (study - 15.0) + 1.2 * (gpa - 2.9)
             + 0.1 * (volunteer - 8.0) + 0.3 * (household - 3.0) - 0.2)
    y = _labels(gen, logit)
    feats = (
        FeatureMeta("age", "continuous", 18.0, 80.0, "immutable"),
        FeatureMeta("income", "continuous", 0.0, 150.0, "free"),
        FeatureMeta("study_hours", "continuous", 0.0, 40.0, "free"),
        FeatureMeta("gpa", "continuous", 0.0, 4.0, "free"),
        FeatureMeta("volunteer_hours", "continuous", 0.0, 30.0, "free"),
        FeatureMeta("household_size", "integer", 1.0, 8.0, "immutable"),
    )
    return Dataset(feats, np.column_stack([age, income, study, gpa, volunteer, household]), y,
                   "granted")


LOAN_FEATURES = ("income", "age", "savings", "debt", "employment_years")


def _loan_rows(gen, n):
    years = np.clip(gen.gamma(2.0, 5.0, n), 0.0, 40.0)
    age = np.clip(22.0 + years + gen.normal(0.0, 6.0, n), 18.0, 80.0)
    income = np.clip(35.0 + 2.2 * years + gen.normal(0.0, 10.0, n), 10.0, 200.0)
    savings = np.clip(0.35 * income + gen.normal(0.0, 8.0, n), 0.0, 100.0)
    debt = np.clip(gen.normal(30.0, 12.0, n), 0.0, 100.0)
    return np.column_stack([income, age, savings, debt, years])


def _loan_logit(X):
    income, _, savings, debt, years = X.T
    return 0.06 * (income - 66.0) + 0.05 * (savings - 23.0) - 0.06 * (debt - 30.0) + 0.05 * (years - 10.0)


LOAN_SCHEMA = (
    FeatureMeta("income", "continuous", 10.0, 200.0, "free"),
    FeatureMeta("age", "continuous", 18.0, 80.0, "immutable"),
    FeatureMeta("savings", "continuous", 0.0, 100.0, "free"),
    FeatureMeta("debt", "continuous", 0.0, 100.0, "decrease-only"),
    FeatureMeta("employment_years", "continuous", 0.0, 40.0, "increase-only"),
)


def loan(n: int = 2000, seed: int = 0) -> Dataset:
    """Loan approval: income, savings and tenure help; debt hurts."""
    gen = _rng(seed, 103)
    X = _loan_rows(gen, n)
    return Dataset(LOAN_SCHEMA, X, _labels(gen, _loan_logit(X)), "approved")


def loan_instance() -> np.ndarray:
    """A rejected applicant whose income (40) is typical for three years of tenure
    but well below the population mean of about 57."""
    return np.array([40.0, 27.0, 14.0, 38.0, 3.0])


GENERATORS = {"correlated": correlated, "grant": grant, "loan": loan}


def generate(name: str, n: int = 2000, seed: int = 0) -> Dataset:
    try:
        return GENERATORS[name](n=n, seed=seed)
    except KeyError:
        raise ValueError(f"unknown synthetic generator {name!r}; choose from {sorted(GENERATORS)}") from None
