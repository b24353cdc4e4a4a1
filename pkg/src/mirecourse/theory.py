"""Monte-Carlo checks of the theoretical guarantees.

* ``verify_prop_upper``: expected squared gap between the action computed on
  an imputed vector and the true optimum, against its variance/confusion bound.
* ``verify_prop_sample``: the sample size that puts some candidate within
  ``eps`` (sup norm) of the hidden original with probability ``1 - delta``.
* ``verify_prop_growth``: sign-pattern counts of a one-parameter action family
  and the uniform deviation of empirical from expected validity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._seeding import rng as _rng
from .actions import closed_form_linear
from .data import Dataset, FeatureMeta, IncompleteInstance
from .imputation import fit_imputer, impute_knn, sample_candidates
from .models import LinearModel, decision_function, predict

LOW_CONFIDENCE_TRIALS = 30


@dataclass(frozen=True)
class UpperBoundReport:
    imputer: str
    trials: int
    estimate: float  # mean squared distance between the two actions
    bound: float
    se_estimate: float
    se_bound: float
    se_gap: float  # standard error of the paired difference estimate - bound
    variance_term: float  # sigma^2 (mean imputer) or the imputation loss (k-NN)
    gamma: float
    p_conf: float
    n_conf: int
    low_confidence: bool
    passed: bool

    def summary(self) -> str:
        flag = " (few confusion trials)" if self.low_confidence else ""
        return (f"upper bound [{self.imputer}]: estimate {self.estimate:.6g} +- {self.se_estimate:.2g}, "
                f"bound {self.bound:.6g} +- {self.se_bound:.2g}, p_conf {self.p_conf:.4g}{flag} -> "
                f"{'PASS' if self.passed else 'FAIL'}")


def _action_gap(model, X, X_hat):
    beta = model.coef
    nrm2 = float(beta @ beta)
    gaps = np.empty(len(X))
    for i, (x, xh) in enumerate(zip(X, X_hat)):
        diff = closed_form_linear(model, xh) - closed_form_linear(model, x)
        gaps[i] = diff @ diff
    f = decision_function(model, X)
    conf = predict(model, X) != predict(model, X_hat)
    return gaps, f, conf, nrm2


def verify_prop_upper(trials: int = 10_000, dim: int = 3, seed: int = 0, imputer: str = "mean",
                      missing: int = 0, beta=None, constant_missing: bool = False,
                      k: int = 5, n_train: int = 500, correlation: float = 0.5) -> UpperBoundReport:
    """Compare the mean squared action gap with its bound on Gaussian data.

    ``imputer="mean"`` fills the missing coordinate with its population mean
    (0); ``imputer="knn"`` uses k-NN imputation fitted on a separate training
    draw and the bound with the imputation loss in place of the variance.
    """
    if trials < 2:
        raise ValueError("need at least two trials")
    if not 0 <= missing < dim:
        raise ValueError("missing feature index out of range")
    gen = _rng(seed, 401)
    cov = np.full((dim, dim), correlation) + (1.0 - correlation) * np.eye(dim)
    if beta is None:
        beta = gen.normal(size=dim)
        while not np.any(beta != 0):
            beta = gen.normal(size=dim)
    model = LinearModel(np.asarray(beta, dtype=float), 0.0)
    X = gen.multivariate_normal(np.zeros(dim), cov, size=trials, method="cholesky")
    if constant_missing:
        X[:, missing] = 0.0
    X_hat = X.copy()
    if imputer == "mean":
        X_hat[:, missing] = 0.0
    elif imputer == "knn":
        T = gen.multivariate_normal(np.zeros(dim), cov, size=n_train, method="cholesky")
        if constant_missing:
            T[:, missing] = 0.0
        span = max(float(np.abs(np.vstack([X, T])).max()), 1.0) + 1.0
        feats = tuple(FeatureMeta(f"z{d}", "continuous", -span, span) for d in range(dim))
        state = fit_imputer(Dataset(feats, T, np.ones(n_train, dtype=int)))
        for i, x in enumerate(X):
            X_hat[i] = impute_knn(IncompleteInstance.from_complete(x, [missing]), state, k=k)
    else:
        raise ValueError(f"unknown imputer {imputer!r}")

    gaps, f, conf, nrm2 = _action_gap(model, X, X_hat)
    b2 = float(model.coef[missing]) ** 2
    sq_err = (X[:, missing] - X_hat[:, missing]) ** 2
    bounds = (b2 * sq_err + f ** 2 * conf) / nrm2
    n = trials
    se = lambda v: float(np.std(v, ddof=1) / math.sqrt(n))
    n_conf = int(conf.sum())
    gamma = float(np.mean(f[conf] ** 2)) if n_conf else 0.0
    estimate, bound = float(gaps.mean()), float(bounds.mean())
    se_gap = se(gaps - bounds)
    return UpperBoundReport(imputer, n, estimate, bound, se(gaps), se(bounds), se_gap,
                            float(sq_err.mean()), gamma, n_conf / n, n_conf,
                            0 < n_conf < LOW_CONFIDENCE_TRIALS,
                            estimate <= bound + 3.0 * se_gap)


@dataclass(frozen=True)
class SampleSizeReport:
    eps: float
    delta: float
    d_star: int
    width: float
    N: int
    trials: int
    coverage: float
    se: float
    exact_coverage: float  # closed form for originals at least eps from the box faces
    passed: bool

    def summary(self) -> str:
        return (f"sample size: N={self.N} (eps={self.eps}, delta={self.delta}, D*={self.d_star}); "
                f"coverage {self.coverage:.4f} +- {self.se:.4f} vs target {1 - self.delta:.4f} -> "
                f"{'PASS' if self.passed else 'FAIL'}")


def sample_size(eps: float, delta: float, d_star: int, width: float = 1.0) -> int:
    """Smallest N with N >= ln(1/delta) * (width / (2 eps))^D*."""
    if eps <= 0 or not 0 < delta < 1 or d_star < 1 or width <= 0:
        raise ValueError("need eps > 0, 0 < delta < 1, D* >= 1 and width > 0")
    return max(1, math.ceil(math.log(1.0 / delta) * (width / (2.0 * eps)) ** d_star - 1e-9))


def verify_prop_sample(eps: float, delta: float, d_star: int, width: float = 1.0,
                       trials: int = 1000, seed: int = 0) -> SampleSizeReport:
    """Draw hidden originals and uniform candidates; count how often one lands within eps.

    Originals are drawn at least ``eps`` away from the box faces, where a
    single uniform candidate is within ``eps`` per coordinate with
    probability exactly ``2 eps / width``.
    """
    N = sample_size(eps, delta, d_star, width)
    gen = _rng(seed, 501)
    # one observed column rides along so the sampler sees a genuine incomplete instance
    D = d_star + 1
    feats = tuple(FeatureMeta(f"u{d}", "continuous", 0.0, width) for d in range(D))
    state = fit_imputer(Dataset(feats, gen.uniform(0.0, width, size=(8, D)), np.ones(8, dtype=int)))
    margin = min(eps, width / 2.0)
    hits = 0
    for t in range(trials):
        x = np.empty(D)
        x[:d_star] = gen.uniform(margin, width - margin, size=d_star)
        x[d_star] = gen.uniform(0.0, width)
        S = sample_candidates(IncompleteInstance.from_complete(x, range(d_star)), "uniform", state,
                              N=N, seed=int(gen.integers(2 ** 63)))
        hits += bool(np.any(np.max(np.abs(S.candidates - x), axis=1) <= eps))
    cov = hits / trials
    se = math.sqrt(max(cov * (1 - cov), 1e-12) / trials)
    p = min(2.0 * eps / width, 1.0) ** d_star
    exact = 1.0 - (1.0 - p) ** N
    return SampleSizeReport(eps, delta, d_star, width, N, trials, cov, se, exact,
                            cov >= 1.0 - delta - 3.0 * se)


@dataclass(frozen=True)
class GrowthReport:
    N: int
    trials: int
    max_patterns: int
    pattern_violations: int  # trials with more than N + 1 patterns
    deviation_bound: float
    max_deviation: float
    fraction_within: float
    delta: float
    holdout: int
    passed: bool

    def summary(self) -> str:
        return (f"growth: N={self.N}, max patterns {self.max_patterns} (limit {self.N + 1}), "
                f"deviation within {self.deviation_bound:.4f} in {self.fraction_within:.3f} of "
                f"{self.trials} trials (need {1 - self.delta:.3f}) -> {'PASS' if self.passed else 'FAIL'}")


def segment_actions(direction, n_alpha: int = 201) -> np.ndarray:
    """The family {alpha * direction : alpha in [0, 1]} on an even alpha grid."""
    return np.linspace(0.0, 1.0, n_alpha)[:, None] * np.asarray(direction, dtype=float)[None, :]


def growth_bound(N: int, delta: float) -> float:
    return math.sqrt(2.0 * math.log(N + 1) / N) + math.sqrt(math.log(1.0 / delta) / (2.0 * N))


def verify_prop_growth(model: LinearModel, actions, N: int, trials: int = 100, delta: float = 0.05,
                       seed: int = 0, holdout: int = 20_000, low=-1.0, high=1.0) -> GrowthReport:
    """Candidates are uniform on the box [low, high]^D; ``actions`` is (K, D)."""
    A = np.atleast_2d(np.asarray(actions, dtype=float))
    D = model.n_features
    gen = _rng(seed, 601)
    H = gen.uniform(low, high, size=(holdout, D))
    V = np.array([np.mean(predict(model, H + a) == 1) for a in A])
    bound = growth_bound(N, delta)
    patterns, devs = [], []
    for _ in range(trials):
        S = gen.uniform(low, high, size=(N, D))
        P = np.stack([predict(model, S + a) == 1 for a in A])  # (K, N)
        patterns.append(len(np.unique(P, axis=0)))
        devs.append(float(np.max(P.mean(axis=1) - V)))
    patterns, devs = np.array(patterns), np.array(devs)
    within = float(np.mean(devs <= bound))
    violations = int(np.sum(patterns > N + 1))
    return GrowthReport(N, trials, int(patterns.max()), violations, bound, float(devs.max()),
                        within, delta, holdout, violations == 0 and within >= 1.0 - delta)
