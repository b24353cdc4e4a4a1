import math

import numpy as np
import pytest

from mirecourse import milp
from mirecourse.milp import MilpModel, SolverParams, dump_lp, lp_relax, solve, solve_exhaustive
from mirecourse.milp.simplex import solve_lp
from mirecourse.recourse import formulate_linear
from mirecourse.models import LinearModel

from oracles import brute_binary, random_grid

scipy_optimize = pytest.importorskip("scipy.optimize")


def _model(c, rows, *, binary=True, lower=0.0, upper=1.0):
    m = MilpModel()
    for j in range(len(c)):
        m.add_var(f"x{j}", "binary" if binary else "continuous", lower, upper)
    m.set_objective(dict(enumerate(c)))
    for coeffs, sense, rhs in rows:
        m.add_constraint(dict(enumerate(coeffs)), sense, rhs)
    return m


def test_spec_toys():
    res = solve(_model([1, 2], [([1, 1], ">=", 1)]))
    assert res.status == milp.OPTIMAL and res.objective == 1 and res.assignment.tolist() == [1, 0]
    assert solve(_model([1, 1], [([1, 1], ">=", 3)])).status == milp.INFEASIBLE


def test_relaxation_bounds():
    # min x1 + x2 s.t. 2x1 + 2x2 >= 3: LP 1.5, integer 2
    m = _model([1, 1], [([2, 2], ">=", 3)])
    bound, _ = lp_relax(m)
    assert bound == pytest.approx(1.5)
    assert solve(m).objective == 2
    tight = _model([1, 2], [([1, 1], ">=", 1)])
    assert lp_relax(tight)[0] == pytest.approx(solve(tight).objective)
    # infeasible as an integer program, feasible as an LP
    odd = _model([0, 0], [([2, 2], "==", 1)])
    assert math.isfinite(lp_relax(odd)[0]) and solve(odd).status == milp.INFEASIBLE


def _random_lp(rng, trial):
    m, n = rng.integers(1, 7), rng.integers(1, 8)
    if trial % 2:
        A = rng.integers(-2, 3, size=(m, n)).astype(float)
        b = rng.integers(-2, 3, size=m).astype(float)
    else:
        A = rng.normal(size=(m, n)).round(1)
        b = rng.normal(size=m).round(1)
    sense = rng.integers(-1, 2, size=m)
    lb = rng.uniform(-2, 0, size=n).round(1)
    ub = lb + rng.uniform(0, 3, size=n).round(1)
    if trial % 3 == 0:
        ub[rng.random(n) < 0.3] = np.inf
    return rng.normal(size=n).round(1), A, sense, b, lb, ub


def test_simplex_agrees_with_highs():
    rng = np.random.default_rng(0)
    for trial in range(400):
        c, A, sense, b, lb, ub = _random_lp(rng, trial)
        got = solve_lp(c, A, sense, b, lb, ub)
        kw = {}
        if (sense != 0).any():
            kw["A_ub"] = np.vstack([A[sense == -1], -A[sense == 1]])
            kw["b_ub"] = np.concatenate([b[sense == -1], -b[sense == 1]])
        if (sense == 0).any():
            kw["A_eq"], kw["b_eq"] = A[sense == 0], b[sense == 0]
        ref = scipy_optimize.linprog(c, bounds=[(l, None if np.isinf(u) else u) for l, u in zip(lb, ub)],
                                     method="highs", **kw)
        expect = {0: "optimal", 2: "infeasible", 3: "unbounded"}[ref.status]
        assert got.status == expect, trial
        if expect == "optimal":
            assert got.objective == pytest.approx(ref.fun, abs=1e-6)
            x = got.x
            assert np.all(x >= lb - 1e-7) and np.all(x <= ub + 1e-7)


@pytest.mark.parametrize("rule", ["group-order", "most-fractional"])
def test_branch_and_bound_matches_enumeration(rule):
    rng = np.random.default_rng(1)
    for trial in range(150):
        n, m = int(rng.integers(1, 8)), int(rng.integers(1, 5))
        c = rng.integers(-3, 6, size=n).astype(float)
        A = rng.integers(-2, 4, size=(m, n)).astype(float)
        b = rng.integers(-1, 4, size=m).astype(float)
        sense = rng.integers(-1, 2, size=m)
        rows = [(A[i], {-1: "<=", 0: "==", 1: ">="}[int(sense[i])], b[i]) for i in range(m)]
        model = _model(c, rows)
        if n >= 2 and trial % 2:
            model.add_group([0, 1])
        best, _ = brute_binary(c, A, sense, b)
        res = solve(model, SolverParams(branching=rule))
        if math.isinf(best):
            assert res.status == milp.INFEASIBLE, trial
        else:
            assert res.status == milp.OPTIMAL and res.objective == pytest.approx(best, abs=1e-6), trial
            assert model.violations(res.assignment) == []


def _selection_model(rng, groups=4, size=4, scenarios=4, k=None):
    grid = random_grid(rng, groups, size)
    X = rng.uniform(-1, 1, size=(scenarios, groups))
    rho = (k or int(rng.integers(1, scenarios + 1))) / scenarios
    form = formulate_linear(grid, X, rho, LinearModel(rng.normal(size=groups), float(rng.normal())))
    return form.model


def test_exhaustive_agrees_on_selection_models():
    rng = np.random.default_rng(2)
    for trial in range(60):
        model = _selection_model(rng)
        a, e = solve(model), solve_exhaustive(model)
        assert a.status == e.status
        if a.has_solution:
            assert a.objective == pytest.approx(e.objective, abs=1e-6)


def test_exhaustive_toys():
    m = MilpModel()
    z, p = m.add_var("z"), m.add_var("p")
    m.add_group([z, p])
    nu = m.add_var("nu")
    m.scenarios.append(nu)
    m.set_objective({p: 1.0})
    m.add_constraint({p: 1.0, nu: -1.0}, ">=", 0.0)  # the scenario is valid only with +1
    m.add_constraint({nu: 1.0}, ">=", 1.0)
    res = solve_exhaustive(m)
    assert res.status == milp.OPTIMAL and res.objective == 1.0 and res.assignment[p] == 1
    m.add_constraint({nu: 1.0}, ">=", 2.0)
    assert solve_exhaustive(m).status == milp.INFEASIBLE
    assert solve(m).status == milp.INFEASIBLE


def test_exhaustive_rejects_unsupported_models():
    m = _model([1.0], [([1.0], ">=", 0.5)], binary=False)
    with pytest.raises(ValueError):
        solve_exhaustive(m)


def test_determinism_and_node_limit():
    rng = np.random.default_rng(3)
    model = _selection_model(rng, groups=4, size=5, scenarios=8)
    a, b = solve(model), solve(model)
    assert a.objective == b.objective and np.array_equal(a.assignment, b.assignment) and a.nodes == b.nodes
    capped = solve(model, SolverParams(node_limit=1))
    assert capped.status in (milp.OPTIMAL, milp.TIME_LIMIT_FEASIBLE, milp.TIME_LIMIT_NO_SOLUTION)
    if capped.has_solution:
        assert capped.objective >= a.objective - 1e-9


def test_params_validation():
    with pytest.raises(ValueError):
        SolverParams(time_limit=0)
    with pytest.raises(ValueError):
        SolverParams(branching="random")


def test_lp_dump():
    m = _model([1, -2], [([1, 1], ">=", 1), ([1, -1], "<=", 0)])
    m.add_group([0, 1])
    text = dump_lp(m)
    for token in ("Minimize", "Subject To", "Binaries", "End", "x0", "x1"):
        assert token in text


def test_model_errors():
    m = MilpModel()
    x = m.add_var("x")
    with pytest.raises(ValueError):
        m.add_constraint({5: 1.0}, ">=", 0)
    with pytest.raises(ValueError):
        m.add_constraint({x: 1.0}, ">", 0)
    m.add_group([x])
    with pytest.raises(ValueError):
        m.add_group([x])
