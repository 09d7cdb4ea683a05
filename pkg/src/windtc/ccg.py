"""Column-and-constraint generation driver and the full-enumeration solver.

Each iteration solves the master for an upper bound and a candidate build
``(x, u)``, prices that build with the clearing subproblems for a lower
bound, and adds the optimistic switching pattern of every block to the
master.  The gap is ``(UB - LB) / max(|LB|, 1)``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .grid_data import PowerSystem
from .kkt import build_master, enumerate_patterns, master_solution_values
from .market import (ClearingResult, SubproblemError, absorption_summary, extract_result, investment_cost,
                     solve_sp1, solve_sp2)
from .milp import solve_mip

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-3
ITERATION_TIME_LIMIT = 600.0
TOTAL_TIME_LIMIT = 3600.0
MASTER_GAP = 1e-6
ENUMERATION_GAP = 1e-9  # the enumeration result serves as an oracle, so solve it tightly
ENUMERATION_CAP = 2 ** 10
SP1_WORKERS = 4

CONVERGED = "converged"
ITERATION_LIMIT = "iteration-limit"
TIME_LIMIT = "time-limit"
STALLED = "stalled"


@dataclass
class IterationRecord:
    iter: int
    UB: float
    LB: float
    gap: float
    master_s: float
    sp1_s: float
    sp2_s: float
    added: int = 0
    wall_s: float = 0.0


@dataclass
class CcgState:
    j: int = 0
    UB: float = math.inf
    LB: float = -math.inf
    Zhat: list[set] = field(default_factory=list)
    incumbent: tuple | None = None  # (x, u, Sp2Result)
    log: list[IterationRecord] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return relative_gap(self.UB, self.LB)


def relative_gap(ub: float, lb: float) -> float:
    if not (math.isfinite(ub) and math.isfinite(lb)):
        return math.inf
    return max(0.0, ub - lb) / max(abs(lb), 1.0)


@dataclass
class PlanResult:
    system_name: str
    x: list[int]
    u: list[float]
    site_buses: list[int]
    objective: float
    wind_term: float
    invest_term: float
    results: list[ClearingResult]
    iterations: list[IterationRecord]
    status: str
    UB: float
    LB: float
    method: str = "ccg"
    cardinality: int | None = None
    cuts: bool = False
    seconds: float = 0.0

    @property
    def gap(self) -> float:
        return relative_gap(self.UB, self.LB)

    @property
    def open_lines(self) -> list[list[str]]:
        return [r.open_lines for r in self.results]

    def to_dict(self) -> dict:
        """Result document without timing data (reproducible byte for byte)."""
        r6 = _r
        return {
            "name": self.system_name,
            "method": self.method,
            "status": self.status,
            "objective": r6(self.objective),
            "wind_term": r6(self.wind_term),
            "investment_term": r6(self.invest_term),
            "upper_bound": r6(self.UB),
            "lower_bound": r6(self.LB),
            "gap": r6(self.gap),
            "iterations": len(self.iterations),
            "switch_cardinality": self.cardinality,
            "cuts": self.cuts,
            "wind_sites": [{"bus": b, "install": bool(xi), "capacity": r6(ui)}
                           for b, xi, ui in zip(self.site_buses, self.x, self.u)],
            "demand_blocks": [{"block": r.t, "cost": r6(r.cost), "wind_MW": r6(r.wind_total),
                               "shed_MW": r6(r.shed_total), "open_lines": r.open_lines}
                              for r in self.results],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def write_iterations_csv(self, path: str | Path):
        write_iterations_csv(self.iterations, path)

    def write_timing_csv(self, path: str | Path):
        write_timing_csv(self.iterations, path)


def _r(v) -> float | None:
    if v is None or not math.isfinite(v):
        return None
    v = round(float(v), 6)
    return 0.0 if v == 0 else v


def write_iterations_csv(records: Sequence[IterationRecord], path: str | Path):
    """Bounds per iteration; timing goes to :func:`write_timing_csv`."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "UB", "LB", "gap", "added"])
        for rec in records:
            w.writerow([rec.iter, _csv_num(rec.UB), _csv_num(rec.LB), _csv_num(rec.gap, 9), rec.added])


def write_timing_csv(records: Sequence[IterationRecord], path: str | Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "wall_s", "master_s", "sp1_s", "sp2_s"])
        for rec in records:
            w.writerow([rec.iter, f"{rec.wall_s:.3f}", f"{rec.master_s:.3f}", f"{rec.sp1_s:.3f}",
                        f"{rec.sp2_s:.3f}"])


def _csv_num(v: float, digits: int = 6) -> str:
    return f"{v:.{digits}f}" if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def _clip_build(system: PowerSystem, u, x) -> tuple[list[float], list[int]]:
    u = [min(max(0.0, v), w.cap_max * xi) for v, xi, w in zip(u, x, system.wind_sites)]
    return u, list(x)


def evaluate_build(system: PowerSystem, u, x, *, cuts=None, cardinality=None, backend=None,
                   time_limit: float | None = None):
    """Clearing costs and the optimistic clearing at a fixed build."""
    phi, sp1 = [], []
    for t in range(system.num_blocks):
        cost, res = solve_sp1(system, u, t, cuts=None if cuts is None else cuts[t], cardinality=cardinality,
                              backend=backend, time_limit=time_limit)
        phi.append(cost)
        sp1.append(res)
    sp2 = solve_sp2(system, u, x, phi, cuts=cuts, cardinality=cardinality, backend=backend,
                    time_limit=time_limit)
    return phi, sp1, sp2


def _sp1_all(system, u, cuts, cardinality, backend, limit) -> tuple[list[float], float]:
    """Clearing costs of every block, solved concurrently; returns (costs, summed solve seconds)."""
    def one(t):
        t0 = time.perf_counter()
        cost, _ = solve_sp1(system, u, t, cuts=None if cuts is None else cuts[t], cardinality=cardinality,
                            backend=backend, time_limit=limit)
        return cost, time.perf_counter() - t0

    T = system.num_blocks
    if T == 1:
        out = [one(0)]
    else:
        with ThreadPoolExecutor(max_workers=min(T, SP1_WORKERS)) as pool:
            out = list(pool.map(one, range(T)))
    return [c for c, _ in out], sum(sec for _, sec in out)


def solve_ccg(system: PowerSystem, tol: float = DEFAULT_TOL, *, cuts=None,
              cardinality: int | None = None, backend=None, max_iter: int | None = None,
              iteration_time_limit: float = ITERATION_TIME_LIMIT,
              time_limit: float = TOTAL_TIME_LIMIT, master_gap: float = MASTER_GAP) -> PlanResult:
    """Solve the planning problem by column-and-constraint generation.

    ``cuts`` is a per-block list of :class:`~windtc.cuts.CutSet`;
    ``cardinality`` defaults to the instance's ``switch_cardinality``.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if cardinality is None:
        cardinality = system.switch_cardinality
    start = time.perf_counter()
    T = system.num_blocks
    state = CcgState(Zhat=[set() for _ in range(T)])
    master = build_master(system, cuts=cuts, cardinality=cardinality)
    status = ITERATION_LIMIT

    while True:
        if max_iter is not None and state.j >= max_iter:
            status = ITERATION_LIMIT
            break
        remaining = time_limit - (time.perf_counter() - start)
        if remaining <= 0:
            status = TIME_LIMIT
            break
        state.j += 1
        limit = min(iteration_time_limit, remaining)

        t0 = time.perf_counter()
        msol = solve_mip(master.model, backend, mip_gap=master_gap, time_limit=limit)
        master_s = time.perf_counter() - t0
        if not msol.has_solution:
            log.warning("master ended with status %s at iteration %d", msol.status, state.j)
            status = TIME_LIMIT if msol.status == "limit" else msol.status
            break
        theta = msol.bound if msol.bound is not None else msol.objective
        state.UB = min(state.UB, theta)
        u, x = _clip_build(system, *master_solution_values(master, msol))

        t1 = time.perf_counter()
        try:
            phi, sp1_s = _sp1_all(system, u, cuts, cardinality, backend, limit)
            t2 = time.perf_counter()
            sp2 = solve_sp2(system, u, x, phi, cuts=cuts, cardinality=cardinality, backend=backend,
                            time_limit=limit)
            t3 = time.perf_counter()
        except SubproblemError as exc:
            log.warning("subproblem failed at iteration %d: %s", state.j, exc)
            status = TIME_LIMIT if exc.status == "limit" else exc.status
            state.log.append(IterationRecord(state.j, state.UB, state.LB, state.gap, master_s,
                                             time.perf_counter() - t1, 0.0, 0, time.perf_counter() - t0))
            break
        if sp2.value > state.LB:
            state.LB = sp2.value
            state.incumbent = (x, u, sp2)
        added = 0
        gap = state.gap
        if gap > tol:
            for t, z in enumerate(sp2.patterns):
                if z not in state.Zhat[t]:
                    state.Zhat[t].add(z)
                    master.add_pattern(t, z)
                    added += 1
        state.log.append(IterationRecord(state.j, state.UB, state.LB, gap, master_s, sp1_s, t3 - t2, added,
                                         time.perf_counter() - t0))
        log.info("iter %d  UB %.6f  LB %.6f  gap %.3g", state.j, state.UB, state.LB, gap)
        if gap <= tol:
            status = CONVERGED
            break
        if added == 0:
            log.warning("optimistic patterns already enumerated with gap %.3g; stopping", gap)
            status = STALLED
            break

    return _plan_from_state(system, state, status, cardinality, cuts, time.perf_counter() - start)


def _plan_from_state(system, state: CcgState, status, cardinality, cuts, seconds) -> PlanResult:
    buses = [w.bus for w in system.wind_sites]
    if state.incumbent is None:
        return PlanResult(system.name, [0] * len(buses), [0.0] * len(buses), buses, -math.inf, 0.0, 0.0, [],
                          state.log, status, state.UB, state.LB, "ccg", cardinality, cuts is not None, seconds)
    x, u, sp2 = state.incumbent
    return PlanResult(system.name, x, u, buses, sp2.value, sp2.wind_term, sp2.invest_term, sp2.results,
                      state.log, status, state.UB, state.LB, "ccg", cardinality, cuts is not None, seconds)


def solve_exact_enumeration(system: PowerSystem, *, cuts=None, cardinality: int | None = None,
                            backend=None, cap: int = ENUMERATION_CAP, mip_gap: float = ENUMERATION_GAP,
                            time_limit: float | None = None) -> PlanResult:
    """Master with every admissible switching pattern of every block, solved once."""
    if cardinality is None:
        cardinality = system.switch_cardinality
    start = time.perf_counter()
    Zhat = [enumerate_patterns(system, t, cuts=None if cuts is None else cuts[t], cardinality=cardinality)
            for t in range(system.num_blocks)]
    total = sum(len(z) for z in Zhat)
    if total > cap:
        raise ValueError(f"full enumeration needs {total} optimality blocks, cap is {cap}")
    master = build_master(system, Zhat, cuts=cuts, cardinality=cardinality)
    sol = solve_mip(master.model, backend, mip_gap=mip_gap, time_limit=time_limit)
    seconds = time.perf_counter() - start
    buses = [w.bus for w in system.wind_sites]
    if not sol.has_solution:
        return PlanResult(system.name, [0] * len(buses), [0.0] * len(buses), buses, -math.inf, 0.0, 0.0, [],
                          [], sol.status, math.inf, -math.inf, "enumeration", cardinality, cuts is not None,
                          seconds)
    u, x = _clip_build(system, *master_solution_values(master, sol))
    # report the clearing at the chosen build; the objective is the master's
    summary_res = [extract_result(system, blk, sol, u) for blk in master.tilde]
    wind_term = absorption_summary(summary_res, system).wind_term
    inv = investment_cost(system, u, x)
    bound = sol.bound if sol.bound is not None else sol.objective
    status = CONVERGED if sol.is_optimal else TIME_LIMIT
    return PlanResult(system.name, x, u, buses, float(sol.objective), wind_term, inv, summary_res, [], status,
                      bound, float(sol.objective), "enumeration", cardinality, cuts is not None, seconds)


# ---------------------------------------------------------------------------
# experiments

def without_switching(system: PowerSystem) -> PowerSystem:
    """Same instance with every line permanently closed."""
    return system.with_lines([replace(ln, switchable=False) for ln in system.lines])


@dataclass
class Comparison:
    with_tc: PlanResult
    without_tc: PlanResult

    @property
    def objective_improvement(self) -> float:
        return _improvement(self.with_tc.objective, self.without_tc.objective)

    @property
    def wind_improvement(self) -> float:
        return _improvement(self.with_tc.wind_term, self.without_tc.wind_term)

    def row(self) -> dict:
        return {"name": self.with_tc.system_name,
                "obj_tc": _r(self.with_tc.objective), "obj_notc": _r(self.without_tc.objective),
                "wind_tc": _r(self.with_tc.wind_term), "wind_notc": _r(self.without_tc.wind_term),
                "obj_impr": _r(self.objective_improvement), "wind_impr": _r(self.wind_improvement)}


IMPROVEMENT_SNAP = 1e-9


def _improvement(new: float, base: float) -> float:
    if not (math.isfinite(new) and math.isfinite(base)):
        return math.nan
    rel = (new - base) / max(abs(base), 1.0)
    return 0.0 if abs(rel) < IMPROVEMENT_SNAP else rel


def compare_tc(system: PowerSystem, tol: float = DEFAULT_TOL, **kw) -> Comparison:
    """Plan with switching and with every line closed; report relative gains."""
    return Comparison(solve_ccg(system, tol, **kw), solve_ccg(without_switching(system), tol, **kw))


@dataclass
class SweepRow:
    K: int
    objective: float
    wind_term: float
    status: str


def cardinality_sweep(system: PowerSystem, kmax: int, tol: float = DEFAULT_TOL, **kw) -> list[SweepRow]:
    """Plans for switch-off limits ``K = 0..kmax``.

    ``K = 0`` forbids switching, so it is solved on the all-closed network.
    """
    if kmax < 0:
        raise ValueError("kmax must be non-negative")
    rows = []
    for K in range(kmax + 1):
        if K == 0:
            plan = solve_ccg(without_switching(system), tol, **kw)
        else:
            plan = solve_ccg(system, tol, cardinality=K, **kw)
        rows.append(SweepRow(K, plan.objective, plan.wind_term, plan.status))
    return rows
