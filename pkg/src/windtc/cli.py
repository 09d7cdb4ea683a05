"""Command-line entry point: ``windtc --instance PATH --mode plan|compare|ksweep|validate``.

Exit status: 0 success, 2 usage error, 3 instance parse error, 4 failed
modeling assumptions, 5 iteration or time limit hit, 6 solver failure.
Every failure also prints one ``windtc: error: ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from .ccg import (CONVERGED, DEFAULT_TOL, ITERATION_LIMIT, STALLED, TIME_LIMIT, PlanResult, cardinality_sweep,
                  compare_tc, solve_ccg)
from .cuts import generate_cuts, write_cuts
from .grid_data import BUNDLED, InstanceError, PowerSystem, generate_instance, load_bundled, load_instance, \
    validate_assumptions
from .market import SubproblemError, write_dispatch_csv, write_summary_csv, write_topology_csv
from .topologies import TEMPLATES

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_ASSUMPTION = 4
EXIT_LIMIT = 5
EXIT_SOLVER = 6

LIMIT_STATUSES = (ITERATION_LIMIT, TIME_LIMIT, STALLED)

log = logging.getLogger("windtc")


@dataclass
class RunConfig:
    instance: str | None
    mode: str
    tol: float
    cuts: bool
    kmax: int
    backend: str | None
    out: Path
    seed: int
    generate: str | None = None
    kappa: float | None = None
    bigm: float | None = None
    max_iter: int | None = None
    time_limit: float | None = None


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="windtc", description="Wind capacity planning with topology control.")
    ap.add_argument("--instance", help="instance JSON path or a bundled name (%s)" % ", ".join(BUNDLED))
    ap.add_argument("--generate", choices=sorted(TEMPLATES), help="generate a random instance from a template")
    ap.add_argument("--mode", choices=("plan", "compare", "ksweep", "validate"), default="plan")
    ap.add_argument("--tol", type=float, default=DEFAULT_TOL, help="relative optimality gap (default 1e-3)")
    ap.add_argument("--cuts", choices=("on", "off"), default="off", help="add structural switching cuts")
    ap.add_argument("--kmax", type=int, default=None, help="largest switch-off limit for ksweep")
    ap.add_argument("--backend", default=None, help="builtin | highs | external:CMD")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--seed", type=int, default=0, help="seed for --generate")
    ap.add_argument("--kappa", type=float, default=None, help="override the wind energy weight")
    ap.add_argument("--bigm", type=float, default=None, help="override the complementarity big-M")
    ap.add_argument("--max-iter", type=int, default=None)
    ap.add_argument("--time-limit", type=float, default=None, help="total seconds for one CCG run")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.tol <= 0:
        raise UsageError("--tol must be positive")
    if (args.instance is None) == (args.generate is None):
        raise UsageError("give exactly one of --instance and --generate")
    if args.kmax is not None and args.kmax < 0:
        raise UsageError("--kmax must be non-negative")
    if args.backend is not None and not (args.backend in ("builtin", "highs") or
                                         (args.backend.startswith("external:") and len(args.backend) > 9)):
        raise UsageError(f"unknown backend {args.backend!r}")
    return RunConfig(instance=args.instance, mode=args.mode, tol=args.tol, cuts=args.cuts == "on",
                     kmax=args.kmax if args.kmax is not None else -1, backend=args.backend, out=Path(args.out),
                     seed=args.seed, generate=args.generate, kappa=args.kappa, bigm=args.bigm,
                     max_iter=args.max_iter, time_limit=args.time_limit)


def load_system(cfg: RunConfig) -> PowerSystem:
    if cfg.generate is not None:
        system = generate_instance(cfg.seed, cfg.generate)
    elif Path(cfg.instance).exists():
        system = load_instance(cfg.instance)
    elif cfg.instance in BUNDLED:
        system = load_bundled(cfg.instance)
    else:
        raise InstanceError(f"cannot read instance {cfg.instance!r}")
    changes = {}
    if cfg.kappa is not None:
        changes["kappa"] = cfg.kappa
    if cfg.bigm is not None:
        changes["bigM_complementarity"] = cfg.bigm
    return system.with_params(**changes) if changes else system


def _solver_kw(cfg: RunConfig) -> dict:
    kw = {"backend": cfg.backend, "max_iter": cfg.max_iter}
    if cfg.time_limit is not None:
        kw["time_limit"] = cfg.time_limit
    return kw


def _cuts(cfg: RunConfig, system: PowerSystem):
    if not cfg.cuts:
        return None
    return generate_cuts(system, backend=cfg.backend)


def write_plan(plan: PlanResult, system: PowerSystem, out: Path, prefix: str = ""):
    (out / f"{prefix}plan.json").write_text(plan.to_json())
    plan.write_iterations_csv(out / f"{prefix}iterations.csv")
    plan.write_timing_csv(out / f"{prefix}timing.csv")
    write_dispatch_csv(plan.results, system, out / f"{prefix}dispatch.csv")
    write_topology_csv(plan.results, out / f"{prefix}topology.csv")
    write_summary_csv(plan.results, out / f"{prefix}summary.csv")


def _plan_exit(plans) -> int:
    statuses = [p.status for p in plans]
    if all(s == CONVERGED for s in statuses):
        return EXIT_OK
    bad = next(s for s in statuses if s != CONVERGED)
    if bad in LIMIT_STATUSES:
        _error(f"run stopped before convergence ({bad})")
        return EXIT_LIMIT
    _error(f"solver failure ({bad})")
    return EXIT_SOLVER


def run_plan(cfg: RunConfig, system: PowerSystem) -> int:
    cuts = _cuts(cfg, system)
    write_cuts(cuts or [], cfg.out / "cuts.txt")
    plan = solve_ccg(system, cfg.tol, cuts=cuts, **_solver_kw(cfg))
    write_plan(plan, system, cfg.out)
    print(f"{plan.status}: objective {plan.objective:.6f} gap {plan.gap:.3g} after {len(plan.iterations)} "
          f"iteration(s)")
    return _plan_exit([plan])


def run_compare(cfg: RunConfig, system: PowerSystem) -> int:
    cuts = _cuts(cfg, system)
    write_cuts(cuts or [], cfg.out / "cuts.txt")
    cmp = compare_tc(system, cfg.tol, cuts=cuts, **_solver_kw(cfg))
    write_plan(cmp.with_tc, system, cfg.out, "tc_")
    write_plan(cmp.without_tc, system, cfg.out, "notc_")
    row = cmp.row()
    with open(cfg.out / "compare.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(row))
        w.writeheader()
        w.writerow(row)
    print(f"objective improvement {row['obj_impr']}, wind improvement {row['wind_impr']}")
    return _plan_exit([cmp.with_tc, cmp.without_tc])


def run_ksweep(cfg: RunConfig, system: PowerSystem) -> int:
    kmax = cfg.kmax if cfg.kmax >= 0 else len(system.switchable_lines)
    cuts = _cuts(cfg, system)
    rows = cardinality_sweep(system, kmax, cfg.tol, cuts=cuts, **_solver_kw(cfg))
    with open(cfg.out / "ksweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["K", "objective", "wind_term", "status"])
        for r in rows:
            w.writerow([r.K, f"{r.objective:.6f}", f"{r.wind_term:.6f}", r.status])
    print(f"ksweep K=0..{kmax} written")
    if all(r.status == CONVERGED for r in rows):
        return EXIT_OK
    bad = next(r.status for r in rows if r.status != CONVERGED)
    _error(f"sweep run stopped before convergence ({bad})")
    return EXIT_LIMIT if bad in LIMIT_STATUSES else EXIT_SOLVER


def run_validate(cfg: RunConfig, system: PowerSystem) -> int:
    report = validate_assumptions(system, backend=cfg.backend)
    text = "\n".join(report.lines()) + "\n"
    (cfg.out / "assumptions.txt").write_text(text)
    sys.stdout.write(text)
    if not report.ok:
        _error("modeling assumptions fail: " + "; ".join(c.detail for c in report.failures()))
        return EXIT_ASSUMPTION
    return EXIT_OK


MODES = {"plan": run_plan, "compare": run_compare, "ksweep": run_ksweep, "validate": run_validate}


def _error(msg: str):
    print(f"windtc: error: {msg}", file=sys.stderr)


def run(cfg: RunConfig) -> int:
    try:
        system = load_system(cfg)
    except (InstanceError, OSError) as exc:
        _error(f"instance: {exc}")
        return EXIT_PARSE
    cfg.out.mkdir(parents=True, exist_ok=True)
    try:
        return MODES[cfg.mode](cfg, system)
    except SubproblemError as exc:
        _error(str(exc))
        return EXIT_LIMIT if exc.status == "limit" else EXIT_SOLVER


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)  # exits with status 2 on bad flags
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except UsageError as exc:
        _error(str(exc))
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
