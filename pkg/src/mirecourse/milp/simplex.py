"""Dense bounded-variable primal simplex (two phases, tableau form).

Solves ``min c @ x`` subject to ``A x (<=, >=, ==) b`` and ``lb <= x <= ub``
with finite ``lb``. Entering variables follow Dantzig's rule; after a run of
degenerate pivots the method switches to Bland's smallest-index rule until
progress resumes, which rules out cycling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

LESS, GREATER, EQUAL = -1, 1, 0

_PIVOT_TOL = 1e-9
_OPT_TOL = 1e-9
_FEAS_TOL = 1e-7
_DEGENERATE_RUN = 30


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "iteration_limit"
    x: Optional[np.ndarray]
    objective: float
    iterations: int


def solve_lp(c, A, sense, b, lb, ub, max_iter=None) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    sense = np.asarray(sense, dtype=int)
    b = np.asarray(b, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    m, n = A.shape
    if np.any(ub < lb - _FEAS_TOL):
        return LPResult("infeasible", None, np.inf, 0)
    if m == 0:
        x = np.where(c < 0, ub, lb)
        if np.any(~np.isfinite(x)):
            return LPResult("unbounded", None, -np.inf, 0)
        return LPResult("optimal", x, float(c @ x), 0)

    # drop fixed columns
    free = ub > lb
    x_fixed = np.where(free, 0.0, lb)
    rhs = b - A @ np.where(free, lb, x_fixed)
    cols = np.flatnonzero(free)
    Af = A[:, cols]
    u = ub[cols] - lb[cols]
    nf = len(cols)

    n_slack = int(np.count_nonzero(sense != EQUAL))
    slack_rows = np.flatnonzero(sense != EQUAL)
    S = np.zeros((m, n_slack))
    S[slack_rows, np.arange(n_slack)] = np.where(sense[slack_rows] == LESS, 1.0, -1.0)
    M = np.hstack([Af, S])
    flip = rhs < 0
    M[flip] *= -1.0
    rhs = np.where(flip, -rhs, rhs)

    # initial basis: slack with +1 after sign normalisation, otherwise an artificial
    slack_col = np.full(m, -1)
    slack_col[slack_rows] = nf + np.arange(n_slack)
    use_slack = np.zeros(m, dtype=bool)
    for i in slack_rows:
        use_slack[i] = M[i, slack_col[i]] > 0
    art_rows = np.flatnonzero(~use_slack)
    n_art = len(art_rows)
    Art = np.zeros((m, n_art))
    Art[art_rows, np.arange(n_art)] = 1.0
    T0 = np.hstack([M, Art])
    T = T0.copy()
    ntot = T.shape[1]
    ubound = np.concatenate([u, np.full(n_slack, np.inf), np.full(n_art, np.inf)])
    basis = np.where(use_slack, slack_col, 0)
    basis[art_rows] = nf + n_slack + np.arange(n_art)
    xB = rhs.copy()
    at_upper = np.zeros(ntot, dtype=bool)
    is_basic = np.zeros(ntot, dtype=bool)
    is_basic[basis] = True
    allowed = np.ones(ntot, dtype=bool)
    limit = max_iter if max_iter is not None else 50 * (m + ntot) + 1000
    iters = 0

    if n_art:
        cost1 = np.zeros(ntot)
        cost1[nf + n_slack:] = 1.0
        status, k = _run(T, xB, basis, is_basic, at_upper, ubound, cost1, allowed, limit)
        iters += k
        if status != "optimal":
            return LPResult(status if status != "unbounded" else "infeasible", None, np.inf, iters)
        art_val = xB[basis >= nf + n_slack].sum()
        if art_val > _FEAS_TOL * (1.0 + np.abs(rhs).max()):
            return LPResult("infeasible", None, np.inf, iters)
        # artificials may stay basic at zero but can never move again
        ubound[nf + n_slack:] = 0.0
        allowed[nf + n_slack:] = False

    cost2 = np.zeros(ntot)
    cost2[:nf] = c[cols]
    status, k = _run(T, xB, basis, is_basic, at_upper, ubound, cost2, allowed, limit - iters)
    iters += k
    if status != "optimal":
        return LPResult(status, None, -np.inf if status == "unbounded" else np.inf, iters)

    full = np.where(at_upper, ubound, 0.0)
    full[basis] = xB
    # refresh basic values from the original columns to shed accumulated drift
    Bmat = T0[:, basis]
    nonbasic_part = T0 @ np.where(is_basic, 0.0, full)
    try:
        refined = np.linalg.solve(Bmat, rhs - nonbasic_part)
        if np.all(np.isfinite(refined)) and np.abs(refined - xB).max() < 1e-6 * (1 + np.abs(xB).max()):
            full[basis] = refined
    except np.linalg.LinAlgError:
        pass
    y = np.clip(full[:nf], 0.0, u)
    x = x_fixed.copy()
    x[cols] = lb[cols] + y
    return LPResult("optimal", x, float(c @ x), iters)


def _run(T, xB, basis, is_basic, at_upper, ubound, cost, allowed, limit):
    """Primal simplex iterations on the tableau, in place."""
    m, ntot = T.shape
    d = cost - cost[basis] @ T
    # +1 for nonbasic columns resting at their lower bound, -1 at their upper bound
    sgn = np.where(at_upper, -1.0, 1.0)
    free = allowed & (ubound > 0) & ~is_basic
    ub_basic = ubound[basis]
    ratios = np.empty(m)
    degenerate = 0
    for it in range(limit):
        gain = np.where(free, -d * sgn, 0.0)
        if degenerate > _DEGENERATE_RUN:
            cand = np.flatnonzero(gain > _OPT_TOL)
            if len(cand) == 0:
                return "optimal", it
            q = int(cand[0])
        else:
            q = int(np.argmax(gain))
            if gain[q] <= _OPT_TOL:
                return "optimal", it
        direction = sgn[q]
        a = direction * T[:, q]
        ratios.fill(np.inf)
        np.divide(np.maximum(xB, 0.0), a, out=ratios, where=a > _PIVOT_TOL)
        np.divide(np.maximum(ub_basic - xB, 0.0), -a, out=ratios, where=a < -_PIVOT_TOL)
        if degenerate > _DEGENERATE_RUN:
            r = _argmin_bland(ratios, basis)
        else:
            r = int(np.argmin(ratios))
        t_best = ratios[r]
        t_flip = ubound[q]
        if t_flip <= t_best:
            if not np.isfinite(t_flip):
                return "unbounded", it
            xB -= t_flip * a
            at_upper[q] = not at_upper[q]
            sgn[q] = -direction
            degenerate = 0 if t_flip > 0 else degenerate + 1
            continue
        t = t_best
        degenerate = degenerate + 1 if t <= 1e-12 else 0
        start = ubound[q] if at_upper[q] else 0.0
        xB -= t * a
        leaving = basis[r]
        up = bool(a[r] < 0)
        at_upper[leaving] = up
        sgn[leaving] = -1.0 if up else 1.0
        is_basic[leaving] = False
        free[leaving] = allowed[leaving] and ubound[leaving] > 0
        T[r] /= T[r, q]
        colq = T[:, q].copy()
        colq[r] = 0.0
        T -= colq[:, None] * T[r]
        d -= d[q] * T[r]
        basis[r] = q
        is_basic[q] = True
        free[q] = False
        at_upper[q] = False
        ub_basic[r] = ubound[q]
        xB[r] = start + direction * t
    return "iteration_limit", limit


def _argmin_bland(ratios, basis):
    """Row with the smallest ratio; ties go to the lowest basic variable index."""
    best = ratios.min()
    rows = np.flatnonzero(ratios <= best + 1e-14 * (1.0 + abs(best)))
    return int(rows[np.argmin(basis[rows])])
