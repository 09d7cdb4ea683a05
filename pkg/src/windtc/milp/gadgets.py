"""The two linearization gadgets: binary-continuous products and
big-M complementarity."""

from __future__ import annotations

import math

import numpy as np

from .model import ComplementarityPair, LinExpr, MilpModel, ModelError, Solution, Variable

BIGM_AUDIT_FRACTION = 1e-3


def add_product(model: MilpModel, binary: Variable, cont: Variable, bound: float | None = None,
                name: str | None = None) -> Variable:
    """Add ``aux = binary * cont`` exactly for integral ``binary``.

    ``bound`` is the magnitude B with ``cont`` in [-B, B]; by default it is
    taken from the bounds of ``cont``.  Emits

        -B*z <= aux <= B*z
        cont - B*(1-z) <= aux <= cont + B*(1-z)
    """
    if not binary.is_binary:
        raise ModelError(f"{binary.name} is not binary")
    if bound is None:
        bound = max(abs(cont.lb), abs(cont.ub))
    if not math.isfinite(bound):
        raise ModelError(f"product needs a bounded continuous factor, {cont.name} is unbounded")
    if bound < max(abs(cont.lb) if math.isfinite(cont.lb) else 0.0,
                   abs(cont.ub) if math.isfinite(cont.ub) else 0.0):
        raise ModelError(f"bound {bound} does not cover the range of {cont.name}")
    B = float(bound)
    name = name or f"prod[{binary.name},{cont.name}]"
    aux = model.add_var(name, -B, B)
    model.add_constr(aux + B * binary, ">=", 0.0, f"{name}.lo_z")
    model.add_constr(aux - B * binary, "<=", 0.0, f"{name}.hi_z")
    # cont - B + B z <= aux   <=>   aux - cont - B z >= -B
    model.add_constr(aux - cont - B * binary, ">=", -B, f"{name}.lo_x")
    model.add_constr(aux - cont + B * binary, "<=", B, f"{name}.hi_x")
    return aux


def add_complementarity(model: MilpModel, var_expr, slack_expr, M: float, *,
                        var_bound: float | None = None, slack_bound: float | None = None,
                        name: str | None = None) -> Variable:
    """Linearize ``var_expr * slack_expr = 0`` for two nonnegative expressions.

    Adds binary ``d`` with ``var_expr <= Mv*d`` and ``slack_expr <= Ms*(1-d)``.
    ``Mv``/``Ms`` default to ``M``; a caller that knows a valid finite
    upper bound on one side passes it to tighten that side.
    """
    if not M > 0:
        raise ModelError(f"big-M must be positive, got {M}")
    name = name or f"comp{len(model.complementarities)}"
    var_expr = LinExpr.of(var_expr)
    slack_expr = LinExpr.of(slack_expr)
    Mv = M if var_bound is None else min(M, max(float(var_bound), 0.0))
    Ms = M if slack_bound is None else min(M, max(float(slack_bound), 0.0))
    d = model.add_binary(f"{name}.d")
    model.add_constr(var_expr - Mv * d, "<=", 0.0, f"{name}.var")
    model.add_constr(slack_expr + Ms * d, "<=", Ms, f"{name}.slack")
    model.complementarities.append(ComplementarityPair(
        name=name, var_expr=var_expr, slack_expr=slack_expr, indicator=d,
        var_bound=Mv, slack_bound=Ms, audit_var=Mv == M, audit_slack=Ms == M, M=float(M)))
    return d


def audit_bigm(model: MilpModel, solution: Solution,
               fraction: float = BIGM_AUDIT_FRACTION) -> list[tuple[str, str, float, float]]:
    """Flag complementarity expressions within ``fraction*M`` of their big-M.

    Only sides that rely on the generic M (not a natural bound) are checked.
    Returns ``(pair name, side, value, bound)`` tuples.
    """
    if solution.x is None:
        return []
    flags = []
    for pair in model.complementarities:
        margin = fraction * pair.M
        if pair.audit_var:
            val = pair.var_expr.value(solution.x)
            if val >= pair.var_bound - margin:
                flags.append((pair.name, "var", val, pair.var_bound))
        if pair.audit_slack:
            val = pair.slack_expr.value(solution.x)
            if val >= pair.slack_bound - margin:
                flags.append((pair.name, "slack", val, pair.slack_bound))
    return flags


def complementarity_violations(model: MilpModel, x: np.ndarray, tol: float = 1e-6,
                               pairs=None) -> list[tuple[str, float, float]]:
    """Pairs where both sides are positive, i.e. no indicator value fits."""
    out = []
    for pair in model.complementarities if pairs is None else pairs:
        a = pair.var_expr.value(x)
        b = pair.slack_expr.value(x)
        if a < -tol or b < -tol or (a > tol and b > tol):
            out.append((pair.name, a, b))
    return out
