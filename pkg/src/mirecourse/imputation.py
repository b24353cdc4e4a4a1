"""Single imputation and imputation-candidate sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._seeding import derive
from .data import Dataset, IncompleteInstance


@dataclass(frozen=True)
class RidgeRegressor:
    """Predicts one feature from all the others (raw scale)."""

    coef: np.ndarray  # length D, entry for the target itself is 0
    intercept: float
    residual_std: float

    def predict(self, x):
        return float(x @ self.coef + self.intercept)


@dataclass(frozen=True)
class ImputerState:
    means: np.ndarray
    stds: np.ndarray
    train: np.ndarray
    train_std: np.ndarray
    regressors: tuple
    lower: np.ndarray
    upper: np.ndarray
    integral: np.ndarray  # features rounded after imputation

    @property
    def n_features(self):
        return len(self.means)


def fit_imputer(dataset: Dataset, ridge: float = 1e-8) -> ImputerState:
    """Fit means, standardised rows and one ridge regressor per feature.

    ``ridge`` is the penalty on standardised coefficients, scaled by the
    number of rows.
    """
    X = np.asarray(dataset.rows, dtype=float)
    n, D = X.shape
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    safe = np.where(stds > 0, stds, 1.0)
    Z = (X - means) / safe
    regs = []
    for d in range(D):
        others = [k for k in range(D) if k != d]
        A = Z[:, others]
        w = np.linalg.solve(A.T @ A + ridge * n * np.eye(D - 1), A.T @ (X[:, d] - means[d]))
        coef = np.zeros(D)
        coef[others] = w / safe[others]
        icpt = means[d] - coef @ means
        resid = X[:, d] - (X @ coef + icpt)
        dof = max(n - D, 1)
        regs.append(RidgeRegressor(coef, float(icpt), float(np.sqrt(resid @ resid / dof))))
    lower = dataset.lower
    upper = dataset.upper
    integral = np.array([f.kind in ("integer", "binary") for f in dataset.features])
    return ImputerState(means, stds, X, Z, tuple(regs), lower, upper, integral)


def _check(x: IncompleteInstance, state: ImputerState):
    if len(x) != state.n_features:
        raise ValueError(f"instance has {len(x)} features, imputer expects {state.n_features}")


def _round(v, state, idx):
    v = v.copy()
    # np.round is round-half-even
    sel = [d for d in idx if state.integral[d]]
    v[sel] = np.round(v[sel])
    return v


def impute_mean(x: IncompleteInstance, state: ImputerState) -> np.ndarray:
    _check(x, state)
    v = np.array(x.values)
    miss = list(x.missing_set)
    v[miss] = state.means[miss]
    return _round(v, state, miss)


def impute_knn(x: IncompleteInstance, state: ImputerState, k: int = 5) -> np.ndarray:
    _check(x, state)
    if not 1 <= k <= len(state.train):
        raise ValueError("k must lie in [1, number of training rows]")
    v = np.array(x.values)
    miss, obs = list(x.missing_set), list(x.observed_set)
    if not miss:
        return v
    safe = np.where(state.stds > 0, state.stds, 1.0)
    z = (v[obs] - state.means[obs]) / safe[obs]
    dist = np.sqrt(((state.train_std[:, obs] - z) ** 2).sum(axis=1))
    nearest = np.argsort(dist, kind="stable")[:k]
    v[miss] = state.train[nearest][:, miss].mean(axis=0)
    return _round(v, state, miss)


def impute_chained(x: IncompleteInstance, state: ImputerState, sweeps: int = 10,
                   noise: bool = False, seed=0) -> np.ndarray:
    """Chained-equations imputation; with ``noise`` each update is a stochastic draw."""
    _check(x, state)
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    v = np.array(x.values)
    miss = list(x.missing_set)
    if not miss:
        return v
    rng = np.random.default_rng(seed) if noise else None
    v[miss] = state.means[miss]
    for _ in range(sweeps):
        for d in miss:
            reg = state.regressors[d]
            val = reg.predict(v)
            if noise:
                val += rng.normal(0.0, reg.residual_std)
            v[d] = min(max(val, state.lower[d]), state.upper[d])
    return _round(v, state, miss)


@dataclass(frozen=True)
class CandidateSample:
    candidates: np.ndarray  # (N, D)
    source: IncompleteInstance
    spec: str
    seed: object

    def __post_init__(self):
        c = np.array(self.candidates, dtype=float)
        if c.ndim != 2 or len(c) < 1:
            raise ValueError("a candidate sample needs at least one candidate")
        obs = list(self.source.observed_set)
        if not np.array_equal(c[:, obs], np.broadcast_to(self.source.values[obs], (len(c), len(obs)))):
            raise ValueError("candidates must copy every observed coordinate exactly")
        c.setflags(write=False)
        object.__setattr__(self, "candidates", c)

    def __len__(self):
        return len(self.candidates)

    def subset(self, index) -> "CandidateSample":
        return CandidateSample(self.candidates[index], self.source, self.spec, self.seed)


def sample_candidates(x: IncompleteInstance, spec: str, state: ImputerState, N: int = 100,
                      seed=0, sweeps: int = 10) -> CandidateSample:
    """Draw N imputation candidates: ``uniform`` over the box or ``chained_draws``."""
    _check(x, state)
    if N < 1:
        raise ValueError("N must be >= 1")
    miss = list(x.missing_set)
    base = np.array(x.values)
    out = np.tile(base, (N, 1))
    if spec == "uniform":
        rng = np.random.default_rng(derive(seed))
        for d in miss:
            lo, hi = state.lower[d], state.upper[d]
            if state.integral[d]:
                out[:, d] = rng.integers(int(lo), int(hi) + 1, size=N)
            else:
                out[:, d] = rng.uniform(lo, hi, size=N)
    elif spec == "chained_draws":
        if miss:
            for n in range(N):
                out[n] = impute_chained(x, state, sweeps=sweeps, noise=True, seed=derive(seed, n))
    else:
        raise ValueError(f"unknown candidate distribution {spec!r}")
    return CandidateSample(out, x, spec, seed)


def imputer_to_dict(state: ImputerState) -> dict:
    r = repr
    return {
        "means": [r(float(v)) for v in state.means],
        "stds": [r(float(v)) for v in state.stds],
        "train": [[r(float(v)) for v in row] for row in state.train],
        "regressors": [
            {"coef": [r(float(v)) for v in g.coef], "intercept": r(g.intercept), "residual_std": r(g.residual_std)}
            for g in state.regressors
        ],
        "lower": [r(float(v)) for v in state.lower],
        "upper": [r(float(v)) for v in state.upper],
        "integral": [bool(v) for v in state.integral],
    }


def imputer_from_dict(doc) -> ImputerState:
    f = lambda seq: np.array([float(v) for v in seq])
    means, stds = f(doc["means"]), f(doc["stds"])
    train = np.array([[float(v) for v in row] for row in doc["train"]]).reshape(-1, len(means))
    safe = np.where(stds > 0, stds, 1.0)
    regs = tuple(RidgeRegressor(f(g["coef"]), float(g["intercept"]), float(g["residual_std"]))
                 for g in doc["regressors"])
    return ImputerState(means, stds, train, (train - means) / safe, regs,
                        f(doc["lower"]), f(doc["upper"]), np.array(doc["integral"], dtype=bool))
