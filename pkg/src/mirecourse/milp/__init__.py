"""MILP representation, branch-and-bound and the exhaustive oracle."""

from typing import Protocol

from .bnb import lp_relax, solve
from .exhaustive import solve_exhaustive
from .lpformat import dump_lp
from .model import (INFEASIBLE, NUMERICAL, OPTIMAL, TIME_LIMIT_FEASIBLE, TIME_LIMIT_NO_SOLUTION,
                    Constraint, MilpModel, SolveResult, SolverParams, Variable)


class Solver(Protocol):
    """Anything that maps a model and parameters to a SolveResult."""

    def __call__(self, model: MilpModel, params: SolverParams) -> SolveResult: ...


__all__ = [
    "Constraint", "INFEASIBLE", "MilpModel", "NUMERICAL", "OPTIMAL", "SolveResult", "Solver",
    "SolverParams", "TIME_LIMIT_FEASIBLE", "TIME_LIMIT_NO_SOLUTION", "Variable", "dump_lp",
    "lp_relax", "solve", "solve_exhaustive",
]
