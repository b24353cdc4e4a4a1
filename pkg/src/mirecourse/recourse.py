"""Recourse under missing values: validity, MILP builders and the solvers on top.

Every builder turns (grid, candidates, rho, classifier) into a ``Formulation``:
one exactly-one group of selection binaries per actionable feature, one
validity indicator per candidate, and the classifier-specific score rows.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import milp
from ._seeding import derive
from .actions import ActionGrid
from .data import IncompleteInstance
from .imputation import CandidateSample, ImputerState, impute_chained, impute_knn, impute_mean
from .models import LinearModel, ReluNetwork, TreeEnsemble, decision_function, predict
from .milp import MilpModel, SolverParams

_RHO_TOL = 1e-9

# statuses beyond the solver's own
DEGRADED = "heuristic_below_rho"


def empirical_validity(a, S, clf) -> float:
    """Fraction of candidates ``x_n`` with ``predict(x_n + a) = +1``."""
    X = S.candidates if isinstance(S, CandidateSample) else np.atleast_2d(np.asarray(S, dtype=float))
    return float(np.mean(np.asarray(predict(clf, X + np.asarray(a, dtype=float))) == 1))


def required_count(N: int, rho: float) -> int:
    """Smallest integer count meeting ``count >= N * rho`` (guarding float noise)."""
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    return max(1, math.ceil(N * rho - _RHO_TOL))


# ---------------------------------------------------------------------------
# formulations

@dataclass
class Formulation:
    model: MilpModel
    grid: ActionGrid
    pi: dict  # feature -> array of variable ids aligned with grid.values[feature]
    nu: list
    big_m: np.ndarray  # per-candidate score lower bounds used to relax validity rows

    def decode(self, assignment) -> np.ndarray:
        x = np.asarray(assignment, dtype=float)
        a = np.zeros(self.grid.n_features)
        for d, ids in self.pi.items():
            a[d] = self.grid.values[d][int(np.argmax(x[ids]))]
        return a


def _candidates(S):
    X = S.candidates if isinstance(S, CandidateSample) else np.atleast_2d(np.asarray(S, dtype=float))
    if len(X) < 1:
        raise ValueError("need at least one candidate")
    return X


def _skeleton(grid: ActionGrid, N: int, rho: float):
    if grid.n_features == 0:
        raise ValueError("empty grid")
    k = required_count(N, rho)
    m = MilpModel()
    pi = {}
    cost = {}
    for d in grid.actionable:
        ids = [m.add_var(f"pi_{d}_{j}") for j in range(len(grid.values[d]))]
        m.add_constraint({i: 1.0 for i in ids}, "==", 1.0, name=f"one_{d}")
        m.add_group(ids)
        pi[d] = np.array(ids)
        for i, c in zip(ids, grid.costs[d]):
            cost[i] = float(c)
    nu = [m.add_var(f"nu_{n}") for n in range(N)]
    m.scenarios = list(nu)
    m.add_constraint({v: 1.0 for v in nu}, ">=", float(k), name="confidence")
    m.set_objective(cost)
    return m, pi, nu


def _linear_terms(grid, pi, w):
    """Coefficients of ``sum_d w_d * a_d`` over the selection binaries."""
    coeffs = {}
    for d, ids in pi.items():
        if w[d] != 0:
            for i, v in zip(ids, grid.values[d]):
                if v != 0:
                    coeffs[int(i)] = float(w[d] * v)
    return coeffs


def _separable_extreme(grid, w, fn):
    return float(sum(fn(w[d] * grid.values[d]) for d in range(grid.n_features)))


def formulate_linear(grid: ActionGrid, S, rho: float, model: LinearModel) -> Formulation:
    X = _candidates(S)
    N = len(X)
    m, pi, nu = _skeleton(grid, N, rho)
    beta = model.coef
    scores = decision_function(model, X)
    big_m = float(scores.min() + _separable_extreme(grid, beta, np.min))
    terms = _linear_terms(grid, pi, beta)
    for n in range(N):
        # score_n + beta.a >= M (1 - nu_n)
        row = dict(terms)
        row[nu[n]] = big_m
        m.add_constraint(row, ">=", big_m - float(scores[n]), name=f"valid_{n}")
    return Formulation(m, grid, pi, nu, np.full(N, big_m))


def formulate_mlp(grid: ActionGrid, S, rho: float, net: ReluNetwork) -> Formulation:
    """ReLU encoding; neurons whose sign is fixed over the grid skip the indicator."""
    X = _candidates(S)
    N = len(X)
    m, pi, nu = _skeleton(grid, N, rho)
    W, theta = net.weights, net.out_weights
    F = X @ W.T + net.biases  # (N, T)
    hi = np.array([_separable_extreme(grid, W[t], np.max) for t in range(net.n_hidden)])
    lo = np.array([_separable_extreme(grid, W[t], np.min) for t in range(net.n_hidden)])
    H, Hbar = F + hi, F + lo
    relu = lambda z: np.maximum(z, 0.0)
    big_m = np.minimum(theta * relu(Hbar), theta * relu(H)).sum(axis=1) + net.out_bias
    lin = [_linear_terms(grid, pi, W[t]) for t in range(net.n_hidden)]
    for n in range(N):
        score = {}
        const = net.out_bias
        for t in range(net.n_hidden):
            if H[n, t] <= 0:
                continue
            if Hbar[n, t] >= 0:
                const += theta[t] * F[n, t]
                for i, v in lin[t].items():
                    score[i] = score.get(i, 0.0) + theta[t] * v
                continue
            xi = m.add_var(f"xi_{n}_{t}", "continuous", 0.0, float(H[n, t]))
            xib = m.add_var(f"xibar_{n}_{t}", "continuous", 0.0, float(-Hbar[n, t]))
            zeta = m.add_var(f"zeta_{n}_{t}")
            row = {i: -v for i, v in lin[t].items()}
            row[xi], row[xib] = 1.0, -1.0
            m.add_constraint(row, "==", float(F[n, t]), name=f"pre_{n}_{t}")
            m.add_constraint({xi: 1.0, zeta: -float(H[n, t])}, "<=", 0.0, name=f"on_{n}_{t}")
            m.add_constraint({xib: 1.0, zeta: -float(Hbar[n, t])}, "<=", float(-Hbar[n, t]),
                             name=f"off_{n}_{t}")
            score[xi] = score.get(xi, 0.0) + float(theta[t])
        score[nu[n]] = float(big_m[n])
        m.add_constraint(score, ">=", float(big_m[n] - const), name=f"valid_{n}")
    return Formulation(m, grid, pi, nu, big_m)


def _leaf_bounds(tree):
    lo = np.array([leaf.lower for leaf in tree.leaves], dtype=float)
    hi = np.array([leaf.upper for leaf in tree.leaves], dtype=float)
    return lo, hi


def leaf_sets(grid: ActionGrid, x, lo, hi):
    """Per leaf and feature, which grid indices put ``x + a`` inside the leaf box."""
    out = []
    for d in range(grid.n_features):
        v = x[d] + grid.values[d]
        out.append((v[None, :] >= lo[:, d:d + 1]) & (v[None, :] < hi[:, d:d + 1]))
    return out  # list over d of (L, J_d) boolean


def formulate_tree(grid: ActionGrid, S, rho: float, ens: TreeEnsemble) -> Formulation:
    X = _candidates(S)
    N = len(X)
    m, pi, nu = _skeleton(grid, N, rho)
    bounds = [_leaf_bounds(t) for t in ens.trees]
    big_m = np.zeros(N)
    for n in range(N):
        score, const = {}, 0.0
        for t, (tree, w) in enumerate(zip(ens.trees, ens.tree_weights)):
            sets = leaf_sets(grid, X[n], *bounds[t])
            reach = np.all([s.any(axis=1) for s in sets], axis=0)
            leaves = np.flatnonzero(reach)
            if len(leaves) == 0:
                raise ValueError(f"candidate {n} reaches no leaf of tree {t}")
            vals = w * tree.values[leaves]
            big_m[n] += float(vals.min())
            if len(leaves) == 1:
                const += float(vals[0])
                continue
            phis = []
            for leaf in leaves:
                phi = m.add_var(f"phi_{n}_{t}_{leaf}")
                phis.append(phi)
                row = {phi: 0.0}
                for d in range(grid.n_features):
                    member = sets[d][leaf]
                    if member.all():
                        continue
                    row[phi] -= 1.0
                    for i in pi[d][member]:
                        row[int(i)] = 1.0
                m.add_constraint(row, ">=", 0.0, name=f"link_{n}_{t}_{leaf}")
                if vals[len(phis) - 1] != 0:
                    score[phi] = float(vals[len(phis) - 1])
            m.add_constraint({p: 1.0 for p in phis}, "==", 1.0, name=f"leaf_{n}_{t}")
            m.add_group(phis, aux=True)
        score[nu[n]] = float(big_m[n])
        m.add_constraint(score, ">=", float(big_m[n] - const), name=f"valid_{n}")
    return Formulation(m, grid, pi, nu, big_m)


def formulate(grid, S, rho, clf) -> Formulation:
    if isinstance(clf, LinearModel):
        return formulate_linear(grid, S, rho, clf)
    if isinstance(clf, ReluNetwork):
        return formulate_mlp(grid, S, rho, clf)
    if isinstance(clf, TreeEnsemble):
        return formulate_tree(grid, S, rho, clf)
    raise TypeError(f"unsupported classifier {type(clf).__name__}")


# ---------------------------------------------------------------------------
# solvers

@dataclass
class RecourseResult:
    action: Optional[np.ndarray]
    cost: float
    empirical_validity: float
    status: str
    wall_time: float
    meta: dict = field(default_factory=dict)

    @property
    def found(self):
        return self.action is not None


@dataclass(frozen=True)
class Subsample:
    n_sub: int = 10
    repeats: int = 10

    def __post_init__(self):
        if self.n_sub < 1 or self.repeats < 1:
            raise ValueError("subsample sizes must be positive")


def _solve_once(grid, X, rho, clf, params, solver=milp.solve):
    form = formulate(grid, X, rho, clf)
    res = solver(form.model, params)
    if not res.has_solution:
        return None, res
    return form.decode(res.assignment), res


def _finish(a, grid, X, clf, status, start, **meta):
    if a is None:
        return RecourseResult(None, math.inf, 0.0, status, time.perf_counter() - start, meta)
    return RecourseResult(a, grid.cost_of(a), empirical_validity(a, X, clf), status,
                          time.perf_counter() - start, meta)


def solve_armin(x: IncompleteInstance, clf, grid: ActionGrid, S, rho: float,
                heuristic: Optional[Subsample] = None, params: SolverParams = SolverParams(),
                seed=0, solver=milp.solve) -> RecourseResult:
    """Minimum-cost action whose validity over ``S`` is at least ``rho``.

    With a ``Subsample`` heuristic, ``repeats`` small problems over ``n_sub``
    candidates each are solved and the cheapest action meeting ``rho`` on the
    full sample wins; if none does, the most valid one is returned with the
    ``heuristic_below_rho`` status.
    """
    start = time.perf_counter()
    X = _candidates(S)
    N = len(X)
    required_count(N, rho)
    if heuristic is None or heuristic.n_sub >= N:
        a, res = _solve_once(grid, X, rho, clf, params, solver)
        meta = {"heuristic": "off"} if heuristic is None else \
            {"heuristic": "subsample", "n_sub": heuristic.n_sub, "repeats": heuristic.repeats}
        return _finish(a, grid, X, clf, res.status, start, **meta)

    found = []
    statuses = []
    for p in range(heuristic.repeats):
        rng = np.random.default_rng(derive(seed, p))
        idx = np.sort(rng.choice(N, size=heuristic.n_sub, replace=False))
        a, res = _solve_once(grid, X[idx], rho, clf, params, solver)
        statuses.append(res.status)
        if a is not None:
            found.append((grid.cost_of(a), p, a, empirical_validity(a, X, clf)))
    meta = {"heuristic": "subsample", "n_sub": heuristic.n_sub, "repeats": heuristic.repeats,
            "sub_statuses": statuses}
    if not found:
        return _finish(None, grid, X, clf, statuses[-1], start, **meta)
    ok = [f for f in found if f[3] >= rho - _RHO_TOL]
    if ok:
        cost_, p, a, _ = min(ok, key=lambda f: (f[0], f[1]))
        status = milp.OPTIMAL if statuses[p] == milp.OPTIMAL else statuses[p]
    else:
        cost_, p, a, _ = min(found, key=lambda f: (-f[3], f[0], f[1]))
        status = DEGRADED
    meta["chosen"] = p
    return _finish(a, grid, X, clf, status, start, **meta)


def solve_plain_ar(x, clf, grid: ActionGrid, params: SolverParams = SolverParams(),
                   solver=milp.solve) -> RecourseResult:
    """Cheapest grid action that makes the complete vector ``x`` valid."""
    x = np.asarray(x.values if isinstance(x, IncompleteInstance) else x, dtype=float)
    if np.any(np.isnan(x)):
        raise ValueError("plain AR needs a complete instance")
    start = time.perf_counter()
    a, res = _solve_once(grid, x[None, :], 1.0, clf, params, solver)
    return _finish(a, grid, x[None, :], clf, res.status, start)


def impute(x: IncompleteInstance, method: str, state: ImputerState, seed=0, k=5, sweeps=10):
    if method == "mean":
        return impute_mean(x, state)
    if method == "knn":
        return impute_knn(x, state, k=k)
    if method in ("chained", "mice"):
        return impute_chained(x, state, sweeps=sweeps)
    raise ValueError(f"unknown imputer {method!r}")


def solve_imputation_ar(x: IncompleteInstance, imputer: str, state: ImputerState, clf,
                        grid: ActionGrid, params: SolverParams = SolverParams(),
                        solver=milp.solve) -> RecourseResult:
    """Impute once, then solve plain AR at the imputed vector.

    ``grid`` must be built at ``x`` so the missing features stay fixed.
    """
    x_hat = impute(x, imputer, state)
    out = solve_plain_ar(x_hat, clf, grid, params, solver)
    out.meta["imputed"] = x_hat
    return out


def solve_robust_ar(x: IncompleteInstance, imputer: str, state: ImputerState, clf,
                    grid: ActionGrid, S, params: SolverParams = SolverParams(),
                    solver=milp.solve) -> RecourseResult:
    """Cutting plane: add the worst candidate of ``S`` until all of ``S`` is valid."""
    start = time.perf_counter()
    X = _candidates(S)
    x_hat = impute(x, imputer, state)
    active = [x_hat]
    added = []
    a, res = None, None
    for it in range(len(X) + 1):
        a, res = _solve_once(grid, np.array(active), 1.0, clf, params, solver)
        if a is None:
            break
        scores = decision_function(clf, X + a)
        # the largest logistic loss is the smallest score; argmin keeps the lowest index on ties
        worst = int(np.argmin(scores))
        if scores[worst] >= 0:
            break
        if worst in added:
            raise RuntimeError("cutting plane revisited a candidate; solver returned an invalid action")
        added.append(worst)
        active.append(X[worst])
    return _finish(a, grid, X, clf, res.status, start, iterations=len(added) + 1,
                   added=list(added))


@dataclass
class PathResult:
    rhos: list
    actions: list
    costs: list
    validities: list
    status: str

    def __len__(self):
        return len(self.rhos)

    def rows(self):
        return list(zip(self.rhos, self.actions, self.costs, self.validities))


def path(x: IncompleteInstance, clf, grid: ActionGrid, S, params: SolverParams = SolverParams(),
         solver=milp.solve) -> PathResult:
    """Trade-off curve: raise rho just past the validity reached by the last action."""
    X = _candidates(S)
    N = len(X)
    rho = 1.0 / N
    out = PathResult([], [], [], [], milp.OPTIMAL)
    while rho < 1.0 - _RHO_TOL and len(out) < N:
        a, res = _solve_once(grid, X, rho, clf, params, solver)
        if a is None:
            out.status = res.status
            break
        v = empirical_validity(a, X, clf)
        out.rhos.append(rho)
        out.actions.append(a)
        out.costs.append(grid.cost_of(a))
        out.validities.append(v)
        if res.status != milp.OPTIMAL:
            out.status = res.status
        rho = v + 1.0 / N
    return out
