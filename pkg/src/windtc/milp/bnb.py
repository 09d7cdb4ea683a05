"""LP-based branch-and-bound over binary variables.

Node order is depth-first until the first incumbent, then best-bound.
The branching variable is the most fractional binary, ties going to the
lowest column index.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import DEFAULT_MIP_GAP, INT_TOL, MatrixForm
from .simplex import LpResult

LpSolver = Callable[[np.ndarray, object, np.ndarray, np.ndarray, np.ndarray, np.ndarray], LpResult]


@dataclass
class BnbResult:
    status: str  # optimal | infeasible | unbounded | limit | numerical
    x: np.ndarray | None
    objective: float | None  # minimization scale
    bound: float
    nodes: int


def _pick_branch(x: np.ndarray, int_idx: np.ndarray, tol: float) -> int | None:
    vals = x[int_idx]
    frac = np.abs(vals - np.round(vals))
    mask = frac > tol
    if not mask.any():
        return None
    # most fractional; argmax returns the first (lowest index) on ties
    dist = np.where(mask, np.minimum(vals - np.floor(vals), np.ceil(vals) - vals), -1.0)
    return int(int_idx[int(np.argmax(dist))])


def branch_and_bound(form: MatrixForm, lp_solver: LpSolver, *, mip_gap: float = DEFAULT_MIP_GAP,
                     abs_gap: float = 1e-9, time_limit: float | None = None,
                     node_limit: int | None = None, int_tol: float = INT_TOL) -> BnbResult:
    """Minimize ``form`` (a maximization is negated by the caller)."""
    start = time.perf_counter()
    c = form.c
    int_idx = np.flatnonzero(form.integer)
    counter = itertools.count()

    incumbent = None
    inc_obj = math.inf
    nodes = 0
    stack = [(-math.inf, form.lb.copy(), form.ub.copy())]
    heap: list = []
    plunging = True
    hit_limit = False

    def cutoff() -> float:
        if not math.isfinite(inc_obj):
            return math.inf
        return inc_obj - max(abs_gap, mip_gap * abs(inc_obj))

    while stack or heap:
        if time_limit is not None and time.perf_counter() - start > time_limit:
            hit_limit = True
            break
        if node_limit is not None and nodes >= node_limit:
            hit_limit = True
            break
        if plunging and stack:
            parent_bound, lb, ub = stack.pop()
        else:
            if stack:  # leftover plunge nodes join the best-bound queue
                for item in stack:
                    heapq.heappush(heap, (item[0], next(counter), item[1], item[2]))
                stack = []
            parent_bound, _, lb, ub = heapq.heappop(heap)
        if parent_bound >= cutoff():
            continue
        nodes += 1
        res = lp_solver(c, form.A, form.row_lo, form.row_hi, lb, ub)
        if res.status == "infeasible":
            continue
        if res.status == "unbounded":
            if nodes == 1:
                return BnbResult("unbounded", None, None, -math.inf, nodes)
            continue
        if res.status != "optimal":
            return BnbResult("numerical", incumbent, inc_obj if incumbent is not None else None,
                             -math.inf, nodes)
        obj = res.objective
        if obj >= cutoff():
            continue
        j = _pick_branch(res.x, int_idx, int_tol)
        if j is None:
            incumbent = res.x.copy()
            incumbent[int_idx] = np.round(incumbent[int_idx])
            inc_obj = obj
            plunging = False
            continue
        lb_up, ub_dn = lb.copy(), ub.copy()
        lb_up[j] = 1.0
        ub_dn[j] = 0.0
        # the child nearer the LP value goes last so the plunge pops it first
        children = [(obj, lb, ub_dn), (obj, lb_up, ub)]
        if res.x[j] < 0.5:
            children.reverse()
        if plunging:
            stack.extend(children)
        else:
            for ch in children:
                heapq.heappush(heap, (ch[0], next(counter), ch[1], ch[2]))

    open_bounds = [b for b, *_ in stack] + [h[0] for h in heap]
    if incumbent is None:
        if hit_limit:
            return BnbResult("limit", None, None, min(open_bounds, default=-math.inf), nodes)
        return BnbResult("infeasible", None, None, math.inf, nodes)
    bound = min([inc_obj] + [b for b in open_bounds if b < inc_obj])
    status = "limit" if hit_limit and bound < cutoff() else "optimal"
    return BnbResult(status, incumbent, inc_obj, bound, nodes)
