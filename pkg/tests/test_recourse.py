import math

import numpy as np
import pytest

from mirecourse import milp
from mirecourse.actions import build_grid, explicit_grid
from mirecourse.data import Dataset, FeatureMeta, IncompleteInstance
from mirecourse.imputation import fit_imputer, impute_mean, sample_candidates
from mirecourse.milp import solve, solve_exhaustive
from mirecourse.models import Leaf, LinearModel, ReluNetwork, Tree, TreeEnsemble, predict
from mirecourse.recourse import (DEGRADED, Subsample, empirical_validity, impute, formulate, formulate_linear,
                                 formulate_mlp, formulate_tree, leaf_sets, path, required_count,
                                 solve_armin, solve_imputation_ar, solve_plain_ar, solve_robust_ar)

from oracles import brute_recourse, random_case, random_grid

L1 = lambda v: np.abs(np.asarray(v, dtype=float))


def _grid(*values):
    return explicit_grid(values, [L1(v) for v in values])


def test_validity_examples():
    lin = LinearModel(np.array([1.0, 1.0]), 0.0)
    X = np.array([[0.0, -1.0], [0.0, -3.0]])
    assert empirical_validity([2.0, 0.0], X, lin) == 0.5
    assert empirical_validity([0.0, 0.0], X, lin) == 0.0
    X4 = np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [-9.0, 0.0]])
    assert empirical_validity([0.0, 0.0], X4, lin) == 0.75


def test_required_count():
    assert required_count(100, 0.75) == 75
    assert required_count(3, 0.7) == 3
    assert required_count(10, 0.1 * 3) == 3  # 0.30000000000000004 * 10
    with pytest.raises(ValueError):
        required_count(5, 0.0)


def test_linear_big_m_example():
    grid = _grid([-1, 0, 1], [-1, 0, 1])
    form = formulate_linear(grid, np.array([[0.0, 0.0], [1.0, 1.0]]), 0.5, LinearModel(np.array([1.0, -1.0]), 0.0))
    assert np.all(form.big_m == -2.0)


def test_tiny_rho_needs_one_candidate():
    lin = LinearModel(np.array([1.0]), 0.0)
    grid = _grid([0, 1])
    X = np.array([[-5.0], [-0.5]])
    res = solve(formulate_linear(grid, X, 1 / 2, lin).model)
    assert res.status == milp.OPTIMAL and res.objective == 1.0
    res = solve(formulate_linear(grid, np.array([[-5.0], [-3.0]]), 1 / 2, lin).model)
    assert res.status == milp.INFEASIBLE


def test_mlp_stable_neuron_example():
    net = ReluNetwork(np.array([[1.0]]), np.array([0.0]), np.array([2.0]), -0.5)
    form = formulate_mlp(_grid([-1, 0, 1]), np.array([[2.0]]), 1.0, net)
    # F = 2, H = 3, Hbar = 1: active on the whole grid, so no indicator is needed
    assert not any(v.name.startswith("zeta") for v in form.model.variables)
    assert form.big_m[0] == pytest.approx(2.0 * 1.0 - 0.5)


def test_linear_net_matches_linear_model():
    rng = np.random.default_rng(0)
    for _ in range(20):
        beta = rng.normal(size=2)
        grid = random_grid(rng, 2)
        X = rng.uniform(-1, 1, size=(5, 2))
        shift = 20.0  # keeps the pre-activation positive everywhere reachable
        net = ReluNetwork(beta[None, :], np.array([shift]), np.array([1.0]), -shift - 0.3)
        lin = LinearModel(beta, -0.3)
        a = solve(formulate_mlp(grid, X, 0.6, net).model)
        b = solve(formulate_linear(grid, X, 0.6, lin).model)
        assert a.status == b.status
        if a.has_solution:
            assert a.objective == pytest.approx(b.objective, abs=1e-9)


def _stump(threshold=0.5):
    inf = np.inf
    leaves = (Leaf(np.array([-inf]), np.array([threshold]), -1.0), Leaf(np.array([threshold]), np.array([inf]), 1.0))
    return TreeEnsemble((Tree(leaves, ((0, threshold, ~0, ~1),)),), np.array([1.0]), 1)


def test_leaf_set_example():
    grid = _grid([-1, 0, 1])
    ens = _stump()
    lo = np.array([l.lower for l in ens.trees[0].leaves])
    hi = np.array([l.upper for l in ens.trees[0].leaves])
    sets = leaf_sets(grid, np.array([0.0]), lo, hi)
    assert grid.values[0][sets[0][0]].tolist() == [-1.0, 0.0]
    assert grid.values[0][sets[0][1]].tolist() == [1.0]


def test_depth_one_tree_scan():
    grid = _grid([-2, -1, -0.25, 0, 0.3, 0.6, 1.5])
    ens = _stump(0.5)
    X = np.array([[0.0]])
    res = solve(formulate_tree(grid, X, 1.0, ens).model)
    crossing = [v for v in grid.values[0] if v >= 0.5]
    assert res.objective == pytest.approx(min(crossing))


@pytest.mark.parametrize("kind", ["linear", "mlp", "tree"])
def test_formulations_match_brute_force(kind):
    rng = np.random.default_rng({"linear": 10, "mlp": 11, "tree": 12}[kind])
    for trial in range(40):
        grid, X, rho, clf = random_case(rng, kind)
        best, _ = brute_recourse(grid, X, rho, clf)
        form = formulate(grid, X, rho, clf)
        res = solve(form.model)
        if math.isinf(best):
            assert res.status == milp.INFEASIBLE, trial
            continue
        assert res.status == milp.OPTIMAL, trial
        assert res.objective == pytest.approx(best, abs=1e-6), trial
        a = form.decode(res.assignment)
        assert grid.cost_of(a) == pytest.approx(best, abs=1e-6)
        assert empirical_validity(a, X, clf) >= required_count(len(X), rho) / len(X) - 1e-12
        if kind == "linear":
            ex = solve_exhaustive(form.model)
            assert ex.objective == pytest.approx(res.objective, abs=1e-6)


def test_plain_ar_examples():
    lin = LinearModel(np.array([1.0]), 0.0)
    res = solve_plain_ar(np.array([-2.0]), lin, _grid([0, 1, 2, 3]))
    assert res.action.tolist() == [2.0] and res.cost == 2.0
    res = solve_plain_ar(np.array([1.0]), lin, _grid([0, 1, 2, 3]))
    assert res.action.tolist() == [0.0] and res.cost == 0.0
    res = solve_plain_ar(np.array([-9.0]), lin, _grid([0, 1, 2, 3]))
    assert res.action is None and res.status == milp.INFEASIBLE
    with pytest.raises(ValueError):
        solve_plain_ar(np.array([np.nan]), lin, _grid([0, 1]))


def _toy_state():
    rng = np.random.default_rng(0)
    rows = rng.uniform(0, 10, size=(200, 2))
    rows[:, 1] = np.clip(rows[:, 0] + rng.normal(0, 1, 200), 0, 10)
    feats = (FeatureMeta("hours", upper=10.0), FeatureMeta("income", upper=10.0))
    return feats, fit_imputer(Dataset(feats, rows, np.where(rows[:, 0] > 5, 1, -1)))


def test_imputation_ar_remarks():
    feats, state = _toy_state()
    # income helps: the imputed income (about 5) flips x_hat although the true income (1) does not
    clf = LinearModel(np.array([1.0, 1.0]), -9.0)
    x = np.array([5.0, 1.0])
    xt = IncompleteInstance.from_complete(x, [1])
    assert predict(clf, impute_mean(xt, state)) == 1 and predict(clf, x) == -1
    grid = build_grid(xt, feats, 10)
    res = solve_imputation_ar(xt, "mean", state, clf, grid)
    assert np.all(res.action == 0) and res.cost == 0
    assert predict(clf, x + res.action) == -1
    # no missing values: same as plain AR
    full = IncompleteInstance(np.array([2.0, 1.0]))
    g = build_grid(full, feats, 10)
    a, b = solve_imputation_ar(full, "mean", state, clf, g), solve_plain_ar(full, clf, g)
    assert np.array_equal(a.action, b.action) and a.cost == b.cost


def test_armin_heuristic_examples():
    feats, state = _toy_state()
    clf = LinearModel(np.array([1.0, 1.0]), -9.0)
    xt = IncompleteInstance(np.array([3.0, np.nan]))
    grid = build_grid(xt, feats, 10)
    S = sample_candidates(xt, "chained_draws", state, N=30, seed=4)
    full = solve_armin(xt, clf, grid, S, 0.75)
    same = solve_armin(xt, clf, grid, S, 0.75, Subsample(30, 3))
    assert np.array_equal(full.action, same.action) and full.cost == same.cost
    res = solve_armin(xt, clf, grid, S, 0.75, Subsample(10, 10), seed=1)
    assert res.meta["n_sub"] == 10 and res.meta["repeats"] == 10
    assert res.status in (milp.OPTIMAL, DEGRADED)
    if res.status == milp.OPTIMAL:
        assert res.empirical_validity >= 0.75 and res.cost >= full.cost - 1e-12
    # zero action already validates one candidate
    X = np.array([[9.0, 9.0], [0.0, 0.0]])
    low = solve_armin(xt, clf, grid, X, 1 / 2)
    assert low.cost == 0.0 and np.all(low.action == 0)


def test_robust_examples():
    feats, state = _toy_state()
    clf = LinearModel(np.array([1.0, 1.0]), -9.0)
    xt = IncompleteInstance(np.array([3.0, np.nan]))
    grid = build_grid(xt, feats, 10)
    easy = np.array([[9.0, 9.0], [8.0, 9.0]])
    res = solve_robust_ar(xt, "mean", state, clf, grid, easy)
    assert res.meta["iterations"] >= 1 and empirical_validity(res.action, easy, clf) == 1.0
    for trial in range(10):
        S = sample_candidates(xt, "chained_draws", state, N=12, seed=trial)
        rob = solve_robust_ar(xt, "chained", state, clf, grid, S)
        assert rob.meta["iterations"] <= len(S) + 1
        if rob.action is None:
            continue
        assert rob.empirical_validity == 1.0
        # with the imputed vector included in the sample, robust equals the rho = 1 problem
        both = np.vstack([S.candidates, impute(xt, "chained", state)])
        exact = solve_armin(xt, clf, grid, both, 1.0)
        assert rob.cost == pytest.approx(exact.cost, abs=1e-9)


def test_path_properties():
    feats, state = _toy_state()
    clf = LinearModel(np.array([1.0, 1.0]), -9.0)
    for seed in range(5):
        xt = IncompleteInstance(np.array([float(seed), np.nan]))
        grid = build_grid(xt, feats, 8)
        S = sample_candidates(xt, "chained_draws", state, N=12, seed=seed)
        p = path(xt, clf, grid, S)
        assert p.rhos and p.rhos[0] == pytest.approx(1 / 12)
        assert all(b > a for a, b in zip(p.rhos, p.rhos[1:]))
        assert all(b >= a - 1e-12 for a, b in zip(p.costs, p.costs[1:]))
        assert len(p) <= 12
        for rho, v in zip(p.rhos, p.validities):
            assert v >= rho - 1e-9
