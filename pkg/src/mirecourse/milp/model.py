"""Solver-agnostic MILP representation (minimisation)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

SENSES = ("<=", ">=", "==")


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "binary" | "continuous"
    lower: float
    upper: float


@dataclass(frozen=True)
class Constraint:
    coeffs: Dict[int, float]
    sense: str
    rhs: float
    name: str = ""


@dataclass
class MilpModel:
    """Variables, linear constraints and a linear objective to minimise.

    ``groups`` are the action-selection groups (exactly one binary per group
    is 1); ``aux_groups`` are further exactly-one groups that are not part of
    the action; ``scenarios`` lists the per-candidate validity indicators.
    """

    variables: List[Variable] = field(default_factory=list)
    constraints: List[Constraint] = field(default_factory=list)
    objective: Dict[int, float] = field(default_factory=dict)
    objective_constant: float = 0.0
    groups: List[List[int]] = field(default_factory=list)
    aux_groups: List[List[int]] = field(default_factory=list)
    scenarios: List[int] = field(default_factory=list)

    @property
    def n_vars(self):
        return len(self.variables)

    def add_var(self, name, kind="binary", lower=0.0, upper=1.0) -> int:
        if kind not in ("binary", "continuous"):
            raise ValueError(f"unknown variable kind {kind!r}")
        if kind == "binary":
            lower, upper = 0.0, 1.0
        if not (math.isfinite(lower) and math.isfinite(upper)):
            raise ValueError(f"variable {name}: bounds must be finite")
        if lower > upper:
            raise ValueError(f"variable {name}: lower > upper")
        self.variables.append(Variable(name, kind, float(lower), float(upper)))
        return len(self.variables) - 1

    def add_constraint(self, coeffs, sense, rhs, name="") -> int:
        if sense not in SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        clean = {}
        for k, v in dict(coeffs).items():
            if not 0 <= k < self.n_vars:
                raise ValueError(f"constraint {name}: undeclared variable {k}")
            v = float(v)
            if v != 0.0:
                clean[int(k)] = clean.get(int(k), 0.0) + v
        self.constraints.append(Constraint(clean, sense, float(rhs), name))
        return len(self.constraints) - 1

    def set_objective(self, coeffs, constant=0.0):
        self.objective = {int(k): float(v) for k, v in dict(coeffs).items() if v != 0}
        self.objective_constant = float(constant)

    def add_group(self, ids, aux=False):
        ids = [int(i) for i in ids]
        taken = {i for g in self.groups + self.aux_groups for i in g}
        if taken & set(ids):
            raise ValueError("annotated groups must be disjoint")
        if any(self.variables[i].kind != "binary" for i in ids):
            raise ValueError("group members must be binary")
        (self.aux_groups if aux else self.groups).append(ids)

    def validate(self):
        seen = set()
        for g in self.groups + self.aux_groups:
            if seen & set(g):
                raise ValueError("annotated groups must be disjoint")
            seen |= set(g)
        for c in self.constraints:
            if any(not 0 <= k < self.n_vars for k in c.coeffs):
                raise ValueError(f"constraint {c.name}: undeclared variable")

    def to_dense(self):
        """Arrays ``(c, A, sense, b, lb, ub, binary_mask)`` with sense in {-1, 1, 0}."""
        n, m = self.n_vars, len(self.constraints)
        c = np.zeros(n)
        for k, v in self.objective.items():
            c[k] = v
        A = np.zeros((m, n))
        b = np.zeros(m)
        sense = np.zeros(m, dtype=int)
        code = {"<=": -1, ">=": 1, "==": 0}
        for i, con in enumerate(self.constraints):
            for k, v in con.coeffs.items():
                A[i, k] = v
            b[i] = con.rhs
            sense[i] = code[con.sense]
        lb = np.array([v.lower for v in self.variables])
        ub = np.array([v.upper for v in self.variables])
        binary = np.array([v.kind == "binary" for v in self.variables], dtype=bool)
        return c, A, sense, b, lb, ub, binary

    def evaluate(self, assignment) -> float:
        x = _as_vector(self, assignment)
        return float(sum(v * x[k] for k, v in self.objective.items()) + self.objective_constant)

    def violations(self, assignment, tol=1e-6):
        """Names/indices of constraints, bounds or integrality conditions violated."""
        x = _as_vector(self, assignment)
        bad = []
        for j, v in enumerate(self.variables):
            if x[j] < v.lower - tol or x[j] > v.upper + tol:
                bad.append(f"bound:{v.name}")
            if v.kind == "binary" and min(abs(x[j]), abs(x[j] - 1)) > tol:
                bad.append(f"integrality:{v.name}")
        for i, con in enumerate(self.constraints):
            lhs = sum(v * x[k] for k, v in con.coeffs.items())
            scale = tol * max(1.0, abs(con.rhs))
            ok = (con.sense == "<=" and lhs <= con.rhs + scale) or \
                 (con.sense == ">=" and lhs >= con.rhs - scale) or \
                 (con.sense == "==" and abs(lhs - con.rhs) <= scale)
            if not ok:
                bad.append(con.name or f"row{i}")
        return bad


def _as_vector(model, assignment):
    if isinstance(assignment, dict):
        x = np.zeros(model.n_vars)
        for k, v in assignment.items():
            x[k] = v
        return x
    return np.asarray(assignment, dtype=float)


@dataclass(frozen=True)
class SolverParams:
    time_limit: float = 60.0
    gap: float = 1e-6
    branching: str = "group-order"  # or "most-fractional"
    seed: int = 0
    node_limit: Optional[int] = None

    def __post_init__(self):
        if not self.time_limit > 0:
            raise ValueError("time limit must be positive")
        if self.branching not in ("group-order", "most-fractional"):
            raise ValueError(f"unknown branching rule {self.branching!r}")


OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
TIME_LIMIT_FEASIBLE = "time_limit_feasible"
TIME_LIMIT_NO_SOLUTION = "time_limit_no_solution"
NUMERICAL = "numerical_failure"


@dataclass(frozen=True)
class SolveResult:
    status: str
    assignment: Optional[np.ndarray]
    objective: float
    bound_gap: float
    nodes: int = 0

    @property
    def has_solution(self):
        return self.assignment is not None
