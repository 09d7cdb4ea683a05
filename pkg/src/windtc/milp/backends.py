"""Solver backends behind a common ``solve_lp`` / ``solve_mip`` surface.

``builtin``  revised simplex + branch-and-bound from this package.
``highs``    HiGHS through :mod:`scipy.optimize` (default).
``external:CMD``  any solver reachable through an LP file; ``CMD`` may use
             ``{lp}`` and ``{sol}`` placeholders, otherwise both paths are
             appended.  The solver must write ``name value`` lines.
"""

from __future__ import annotations

import logging
import math
import os
import shlex
import subprocess
import tempfile
import time
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy import optimize

from . import simplex
from .bnb import branch_and_bound
from .gadgets import audit_bigm
from .lpfile import read_solution, write_lp
from .model import DEFAULT_MIP_GAP, FEAS_TOL, INT_TOL, MatrixForm, MilpModel, Solution

log = logging.getLogger(__name__)

DEFAULT_BACKEND_ENV = "WINDTC_BACKEND"


def _minimize_form(form: MatrixForm) -> np.ndarray:
    return -form.c if form.maximize else form.c


def _finish(form: MatrixForm, status: str, x, obj_min, duals=None, rc=None, bound_min=None,
            **extra) -> Solution:
    sign = -1.0 if form.maximize else 1.0
    obj = None if obj_min is None else sign * obj_min + form.obj_const
    bound = None if bound_min is None else sign * bound_min + form.obj_const
    if duals is not None:
        duals = sign * np.asarray(duals)
    if rc is not None:
        rc = sign * np.asarray(rc)
    return Solution(status=status, objective=obj, x=x, duals=duals, reduced_costs=rc, bound=bound, **extra)


class Backend:
    name = "abstract"

    def lp(self, form: MatrixForm) -> Solution:
        raise NotImplementedError

    def mip(self, form: MatrixForm, *, mip_gap: float, time_limit: float | None,
            node_limit: int | None) -> Solution:
        raise NotImplementedError


class BuiltinBackend(Backend):
    name = "builtin"

    @staticmethod
    def _lp_raw(c, A, row_lo, row_hi, lb, ub):
        return simplex.solve(c, A, row_lo, row_hi, lb, ub)

    def lp(self, form):
        A = form.A.toarray()
        res = simplex.solve(_minimize_form(form), A, form.row_lo, form.row_hi, form.lb, form.ub)
        if res.status != "optimal":
            return Solution(status=res.status, iterations=res.iterations)
        return _finish(form, "optimal", res.x, res.objective, res.row_duals, res.reduced_costs,
                       res.objective, iterations=res.iterations)

    def mip(self, form, *, mip_gap, time_limit, node_limit):
        dense = MatrixForm(_minimize_form(form), form.A.toarray(), form.row_lo, form.row_hi,
                           form.lb, form.ub, form.integer, 0.0, False)
        res = branch_and_bound(dense, self._lp_raw, mip_gap=mip_gap, time_limit=time_limit,
                               node_limit=node_limit)
        return _finish(form, res.status, res.x, res.objective, bound_min=res.bound, nodes=res.nodes)


class HighsBackend(Backend):
    name = "highs"

    def lp(self, form):
        A = form.A
        eq = np.isfinite(form.row_lo) & (form.row_lo == form.row_hi)
        up = ~eq & np.isfinite(form.row_hi)
        lo = ~eq & np.isfinite(form.row_lo)
        A_ub = sp.vstack([A[up], -A[lo]]).tocsr() if (up.any() or lo.any()) else None
        b_ub = np.concatenate([form.row_hi[up], -form.row_lo[lo]]) if A_ub is not None else None
        A_eq = A[eq] if eq.any() else None
        b_eq = form.row_lo[eq] if eq.any() else None
        bounds = np.column_stack([form.lb, form.ub])
        res = optimize.linprog(_minimize_form(form), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                               bounds=bounds, method="highs")
        if res.status == 2:
            # presolve can report infeasible for an unbounded model; recheck
            probe = optimize.linprog(np.zeros_like(form.c), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq,
                                     b_eq=b_eq, bounds=bounds, method="highs")
            return Solution(status="unbounded" if probe.status == 0 else "infeasible")
        if res.status == 3:
            return Solution(status="unbounded")
        if res.status != 0:
            return Solution(status="numerical" if res.status == 4 else "limit")
        duals = np.zeros(A.shape[0])
        nu = int(up.sum())
        if A_ub is not None:
            m_ub = res.ineqlin.marginals
            duals[np.flatnonzero(up)] += m_ub[:nu]
            duals[np.flatnonzero(lo)] -= m_ub[nu:]
        if A_eq is not None:
            duals[np.flatnonzero(eq)] = res.eqlin.marginals
        rc = res.lower.marginals + res.upper.marginals
        return _finish(form, "optimal", np.asarray(res.x), res.fun, duals, rc, res.fun,
                       iterations=int(getattr(res, "nit", 0)))

    def mip(self, form, *, mip_gap, time_limit, node_limit):
        options = {"mip_rel_gap": mip_gap, "disp": False}
        if time_limit is not None:
            options["time_limit"] = float(time_limit)
        if node_limit is not None:
            options["node_limit"] = int(node_limit)
        cons = optimize.LinearConstraint(form.A, form.row_lo, form.row_hi) if form.A.shape[0] else None
        args = (_minimize_form(form),)
        kw = dict(integrality=form.integer.astype(int), bounds=optimize.Bounds(form.lb, form.ub),
                  constraints=cons)
        res = optimize.milp(*args, **kw, options=options)
        if res.status == 2:
            # presolve occasionally reports tight feasible models infeasible
            res = optimize.milp(*args, **kw, options={**options, "presolve": False})
        bound = getattr(res, "mip_dual_bound", None)
        nodes = int(getattr(res, "mip_node_count", 0) or 0)
        if res.status == 0:
            return _finish(form, "optimal", np.asarray(res.x), res.fun, bound_min=bound, nodes=nodes)
        if res.status == 1:
            x = None if res.x is None else np.asarray(res.x)
            return _finish(form, "limit", x, res.fun if x is not None else None, bound_min=bound, nodes=nodes)
        if res.status == 2:
            return Solution(status="infeasible")
        if res.status == 3:
            return Solution(status="unbounded")
        return Solution(status="numerical")


class ExternalBackend(Backend):
    """Round-trips the model through an LP file and a solver command."""

    def __init__(self, command: str):
        self.command = command
        self.name = f"external:{command}"

    def _run(self, model: MilpModel) -> Solution:
        with tempfile.TemporaryDirectory(prefix="windtc-") as tmp:
            lp = Path(tmp) / "model.lp"
            sol = Path(tmp) / "model.sol"
            write_lp(model, lp)
            cmd = self.command
            if "{lp}" in cmd or "{sol}" in cmd:
                argv = shlex.split(cmd.format(lp=shlex.quote(str(lp)), sol=shlex.quote(str(sol))))
            else:
                argv = shlex.split(cmd) + [str(lp), str(sol)]
            proc = subprocess.run(argv, capture_output=True, text=True)
            if proc.returncode != 0 or not sol.exists():
                log.warning("external solver failed (%s): %s", proc.returncode, proc.stderr.strip()[:500])
                return Solution(status="numerical")
            status, x = read_solution(model, sol.read_text())
        if x is None:
            return Solution(status=status)
        return Solution(status="optimal", objective=model.objective.value(x), x=x)

    # the external path works from the model, not the matrix form
    def lp(self, form):
        raise NotImplementedError

    def mip(self, form, **kw):
        raise NotImplementedError


def get_backend(spec: str | Backend | None = None) -> Backend:
    """Resolve ``builtin``, ``highs`` or ``external:CMD`` to a backend."""
    if isinstance(spec, Backend):
        return spec
    if spec is None:
        spec = os.environ.get(DEFAULT_BACKEND_ENV, "highs")
    if spec == "builtin":
        return BuiltinBackend()
    if spec == "highs":
        return HighsBackend()
    if spec.startswith("external:") and len(spec) > len("external:"):
        return ExternalBackend(spec[len("external:"):])
    raise ValueError(f"unknown backend {spec!r}")


def solve_lp(model: MilpModel, backend: str | Backend | None = None) -> Solution:
    """Solve the continuous relaxation of ``model`` (binaries relaxed)."""
    be = get_backend(backend)
    t0 = time.perf_counter()
    if isinstance(be, ExternalBackend):
        sol = be._run(model.relaxed())
    else:
        sol = be.lp(model.to_matrix())
    sol.seconds = time.perf_counter() - t0
    sol.backend = be.name
    if sol.x is not None:
        sol.bigm_flags = audit_bigm(model, sol)
    return sol


def _polish(model: MilpModel, form: MatrixForm, sol: Solution, be: Backend) -> Solution:
    """Fix binaries at their rounded values and re-solve the LP.

    Removes integrality-tolerance leakage through big-M rows; keeps the
    unpolished point when the fixed LP does not solve cleanly.
    """
    if sol.x is None or not form.integer.any():
        return sol
    xi = np.round(sol.x[form.integer])
    lb, ub = form.lb.copy(), form.ub.copy()
    lb[form.integer] = xi
    ub[form.integer] = xi
    fixed = MatrixForm(form.c, form.A, form.row_lo, form.row_hi, lb, ub, np.zeros_like(form.integer),
                       form.obj_const, form.maximize)
    lp_be = be if not isinstance(be, ExternalBackend) else HighsBackend()
    res = lp_be.lp(fixed)
    if res.status != "optimal":
        log.debug("polish LP for %s returned %s", model.name, res.status)
        return sol
    sol.x = res.x
    sol.x[form.integer] = xi
    sol.objective = model.objective.value(sol.x)
    if sol.bound is not None:
        better = sol.objective > sol.bound if form.maximize else sol.objective < sol.bound
        if better:
            sol.bound = sol.objective
    return sol


def solve_mip(model: MilpModel, backend: str | Backend | None = None, *,
              mip_gap: float = DEFAULT_MIP_GAP, time_limit: float | None = None,
              node_limit: int | None = None, polish: bool = True) -> Solution:
    """Solve ``model`` to within ``mip_gap`` relative optimality.

    Models without binaries are passed to the LP path (and keep duals).
    """
    if not model.has_integers:
        return solve_lp(model, backend)
    be = get_backend(backend)
    t0 = time.perf_counter()
    form = model.to_matrix()
    if isinstance(be, ExternalBackend):
        sol = be._run(model)
    else:
        sol = be.mip(form, mip_gap=mip_gap, time_limit=time_limit, node_limit=node_limit)
    if polish:
        sol = _polish(model, form, sol, be)
    sol.seconds = time.perf_counter() - t0
    sol.backend = be.name
    if sol.x is not None:
        bad = model.max_violation(sol.x)
        if bad > 1e3 * FEAS_TOL * max(1.0, float(np.abs(sol.x).max())):
            log.warning("%s: solution violates constraints by %.3g", model.name, bad)
        frac = np.abs(sol.x[form.integer] - np.round(sol.x[form.integer]))
        if frac.size and frac.max() > INT_TOL:
            log.warning("%s: binary off integrality by %.3g", model.name, frac.max())
        sol.bigm_flags = audit_bigm(model, sol)
        for flag in sol.bigm_flags:
            log.warning("big-M may be too small: %s %s side at %.6g (bound %.6g)", *flag)
    if sol.objective is not None and sol.bound is not None and not math.isfinite(sol.bound):
        sol.bound = None
    return sol
