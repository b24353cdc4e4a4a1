"""Best-first branch-and-bound over binary variables with LP bounds."""

from __future__ import annotations

import heapq
import itertools
import time

import numpy as np

from .model import (INFEASIBLE, NUMERICAL, OPTIMAL, TIME_LIMIT_FEASIBLE, TIME_LIMIT_NO_SOLUTION,
                    MilpModel, SolveResult, SolverParams)
from .simplex import solve_lp

_INT_TOL = 1e-6


def lp_relax(model: MilpModel):
    """Relax binaries to [0, 1]; returns ``(bound, x)`` or ``(inf, None)`` if infeasible."""
    model.validate()
    c, A, sense, b, lb, ub, _ = model.to_dense()
    res = solve_lp(c, A, sense, b, lb, ub)
    if res.status == "infeasible":
        return np.inf, None
    if res.status != "optimal":
        raise ArithmeticError(f"LP relaxation ended with status {res.status}")
    return res.objective + model.objective_constant, res.x


class _Problem:
    def __init__(self, model: MilpModel):
        self.model = model
        self.c, self.A, self.sense, self.b, self.lb, self.ub, self.binary = model.to_dense()
        self.bin_idx = np.flatnonzero(self.binary)
        self.groups = [np.array(g, dtype=int) for g in model.groups + model.aux_groups]
        self.group_of = {}
        for gi, g in enumerate(self.groups):
            for v in g:
                self.group_of[int(v)] = gi

    def relax(self, lb, ub):
        return solve_lp(self.c, self.A, self.sense, self.b, lb, ub)

    def fractional(self, x):
        xb = x[self.bin_idx]
        return self.bin_idx[np.minimum(xb, 1.0 - xb) > _INT_TOL]

    def branch_var(self, x, frac, rule):
        if rule == "group-order":
            fset = set(int(v) for v in frac)
            for g in self.groups:
                if any(int(v) in fset for v in g):
                    # largest LP weight; a stable argmax prefers the earlier member
                    return int(g[np.argmax(x[g])])
        dist = np.minimum(x[frac], 1.0 - x[frac])
        return int(frac[np.argmax(dist)])

    def children(self, var, lb, ub):
        one_lb, one_ub = lb.copy(), ub.copy()
        one_lb[var] = 1.0
        gi = self.group_of.get(var)
        if gi is not None:
            others = self.groups[gi][self.groups[gi] != var]
            one_ub[others] = 0.0
        zero_lb, zero_ub = lb.copy(), ub.copy()
        zero_ub[var] = 0.0
        # the "pick this value" child first: it is the one the LP leans towards
        return [(one_lb, one_ub), (zero_lb, zero_ub)]

    def polish(self, x, lb, ub):
        """Round binaries; re-solve the continuous part if rounding broke a row."""
        y = x.copy()
        y[self.bin_idx] = np.round(y[self.bin_idx])
        if not self.model.violations(y, tol=_INT_TOL):
            return y
        flb, fub = lb.copy(), ub.copy()
        flb[self.bin_idx] = y[self.bin_idx]
        fub[self.bin_idx] = y[self.bin_idx]
        res = self.relax(flb, fub)
        if res.status != "optimal":
            return None
        z = res.x
        z[self.bin_idx] = y[self.bin_idx]
        return z if not self.model.violations(z, tol=_INT_TOL) else None


def solve(model: MilpModel, params: SolverParams = SolverParams()) -> SolveResult:
    """Exact solve up to ``params.gap`` unless the time or node limit intervenes."""
    model.validate()
    start = time.perf_counter()
    prob = _Problem(model)
    const = model.objective_constant
    root = prob.relax(prob.lb, prob.ub)
    if root.status == "infeasible":
        return SolveResult(INFEASIBLE, None, np.inf, 0.0, 1)
    if root.status != "optimal":
        return SolveResult(NUMERICAL, None, np.inf, np.inf, 1)

    best_x, best_obj = None, np.inf
    counter = itertools.count()
    # best bound first; among equal bounds the deeper node first
    heap = []
    numerical = False
    nodes = 1

    def consider(res, lb, ub, depth):
        nonlocal best_x, best_obj, numerical
        if res.status == "infeasible":
            return
        if res.status != "optimal":
            numerical = True
            return
        if res.objective >= best_obj - params.gap:
            return
        frac = prob.fractional(res.x)
        if len(frac) == 0:
            y = prob.polish(res.x, lb, ub)
            if y is None:
                numerical = True
                return
            obj = float(prob.c @ y)
            if obj < best_obj:
                best_x, best_obj = y, obj
            return
        heapq.heappush(heap, (res.objective, -depth, next(counter), lb, ub, res.x, frac))

    consider(root, prob.lb, prob.ub, 0)
    timed_out = False
    final_gap = 0.0
    while heap:
        bound, negdepth, _, lb, ub, x, frac = heapq.heappop(heap)
        if bound >= best_obj - params.gap:
            final_gap = max(best_obj - bound, 0.0)
            heap.clear()
            break
        if time.perf_counter() - start > params.time_limit or \
                (params.node_limit is not None and nodes >= params.node_limit):
            heapq.heappush(heap, (bound, negdepth, next(counter), lb, ub, x, frac))
            timed_out = True
            break
        var = prob.branch_var(x, frac, params.branching)
        for clb, cub in prob.children(var, lb, ub):
            nodes += 1
            consider(prob.relax(clb, cub), clb, cub, -negdepth + 1)

    if timed_out:
        open_bound = min(h[0] for h in heap)
        if best_x is None:
            return SolveResult(TIME_LIMIT_NO_SOLUTION, None, np.inf, np.inf, nodes)
        return SolveResult(TIME_LIMIT_FEASIBLE, best_x, best_obj + const,
                           max(best_obj - open_bound, 0.0), nodes)
    if best_x is None:
        return SolveResult(NUMERICAL if numerical else INFEASIBLE, None, np.inf,
                           np.inf if numerical else 0.0, nodes)
    if numerical:
        return SolveResult(NUMERICAL, best_x, best_obj + const, np.inf, nodes)
    return SolveResult(OPTIMAL, best_x, best_obj + const, final_gap, nodes)
