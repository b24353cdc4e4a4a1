"""Brute-force solver for selection-structured models (testing oracle).

Handles models whose variables are the annotated exactly-one groups plus
the scenario indicators. A scenario indicator is set to 1 whenever the rows
that mention only it (besides group variables) allow it; this is optimal
because every row coupling several indicators is a ``>=`` row with
nonnegative coefficients and indicators carry no cost.
"""

from __future__ import annotations

import numpy as np

from .model import INFEASIBLE, OPTIMAL, MilpModel, SolveResult

BUDGET = 10 ** 6
_TOL = 1e-6
_CHUNK = 4096


def solve_exhaustive(model: MilpModel, budget: int = BUDGET) -> SolveResult:
    model.validate()
    groups = [list(g) for g in model.groups + model.aux_groups]
    sizes = [len(g) for g in groups]
    total = int(np.prod(sizes, dtype=object))
    if total > budget:
        raise ValueError(f"enumeration budget exceeded: {total} > {budget} assignments")
    scen = list(model.scenarios)
    in_group = {v for g in groups for v in g}
    extra = set(range(model.n_vars)) - in_group - set(scen)
    if extra:
        raise ValueError("exhaustive solve handles only group and scenario variables")
    if any(model.objective.get(v, 0.0) != 0.0 for v in scen):
        raise ValueError("scenario indicators must carry no cost")

    c, A, sense, b, _, _, _ = model.to_dense()
    scen_arr = np.array(scen, dtype=int)
    S = A[:, scen_arr] if scen else np.zeros((A.shape[0], 0))
    n_in_row = np.count_nonzero(S, axis=1)
    coupling = n_in_row > 1
    if np.any(coupling & ((sense != 1) | np.any(S < 0, axis=1))):
        raise ValueError("rows coupling several indicators must be >= with nonnegative coefficients")
    single = n_in_row == 1
    single_rows = np.flatnonzero(single)
    owner = np.argmax(S[single_rows] != 0, axis=1) if len(single_rows) else np.zeros(0, int)
    pi_cols = A.copy()
    pi_cols[:, scen_arr] = 0.0

    best_obj, best_x = np.inf, None
    for chunk in _assignments(groups, sizes, model.n_vars, total):
        lhs = chunk @ pi_cols.T  # (K, m)
        nu = np.ones((len(chunk), len(scen)))
        ok = np.ones(len(chunk), dtype=bool)
        if len(single_rows):
            coef = S[single_rows, owner]
            with_one = _row_ok(lhs[:, single_rows] + coef, sense[single_rows], b[single_rows])
            with_zero = _row_ok(lhs[:, single_rows], sense[single_rows], b[single_rows])
            for k, n in enumerate(owner):
                nu[~with_one[:, k], n] = 0.0
            fix = np.zeros_like(with_one)
            for k, n in enumerate(owner):
                fix[:, k] = nu[:, n] == 1.0
            need = np.where(fix, with_one, with_zero)
            ok &= need.all(axis=1)
        x = chunk.copy()
        if scen:
            x[:, scen_arr] = nu
        full = x @ A.T
        ok &= _row_ok(full, sense, b).all(axis=1)
        if not ok.any():
            continue
        obj = x[ok] @ c
        k = int(np.argmin(obj))
        if obj[k] < best_obj - 1e-12:
            best_obj, best_x = float(obj[k]), x[ok][k]
    if best_x is None:
        return SolveResult(INFEASIBLE, None, np.inf, 0.0, total)
    return SolveResult(OPTIMAL, best_x, best_obj + model.objective_constant, 0.0, total)


def _row_ok(lhs, sense, b):
    scale = _TOL * np.maximum(1.0, np.abs(b))
    le = lhs <= b + scale
    ge = lhs >= b - scale
    return np.where(sense == -1, le, np.where(sense == 1, ge, le & ge))


def _assignments(groups, sizes, n_vars, total):
    """Yield (K, n_vars) 0/1 matrices covering every exactly-one choice, in order."""
    if not sizes:
        yield np.zeros((1, n_vars))
        return
    for lo in range(0, total, _CHUNK):
        idx = np.arange(lo, min(lo + _CHUNK, total))
        choice = np.array(np.unravel_index(idx, sizes)).T if len(sizes) > 1 else idx[:, None]
        out = np.zeros((len(idx), n_vars))
        for gi, g in enumerate(groups):
            out[np.arange(len(idx)), np.array(g)[choice[:, gi]]] = 1.0
        yield out
