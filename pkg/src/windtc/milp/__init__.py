"""Mixed-integer linear modeling layer with pluggable solver backends."""

from .backends import BuiltinBackend, ExternalBackend, HighsBackend, get_backend, solve_lp, solve_mip
from .gadgets import add_complementarity, add_product, audit_bigm, complementarity_violations
from .lpfile import read_lp, read_solution, write_lp, write_solution
from .model import (DEFAULT_MIP_GAP, FEAS_TOL, INF, INT_TOL, LinearConstraint, LinExpr, MilpModel,
                    ModelError, Solution, Variable, lin_sum)

__all__ = [
    "BuiltinBackend", "ExternalBackend", "HighsBackend", "get_backend", "solve_lp", "solve_mip",
    "add_complementarity", "add_product", "audit_bigm", "complementarity_violations",
    "read_lp", "read_solution", "write_lp", "write_solution",
    "DEFAULT_MIP_GAP", "FEAS_TOL", "INF", "INT_TOL", "LinearConstraint", "LinExpr", "MilpModel",
    "ModelError", "Solution", "Variable", "lin_sum",
]
