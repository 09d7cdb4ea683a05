"""Minimal external solver speaking the LP-file bridge.

Usage: ``python -m windtc.milp.stub_solver MODEL.lp SOLUTION.sol [--engine highs|builtin]``

Reads the model text, solves it in-process and writes ``name value`` lines.
It exists so the external backend can be exercised without third-party
solver binaries.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backends import solve_mip
from .lpfile import read_lp, write_solution


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="windtc-stub-solver")
    ap.add_argument("model")
    ap.add_argument("solution")
    ap.add_argument("--engine", choices=("highs", "builtin"), default="highs")
    ap.add_argument("--gap", type=float, default=1e-9)
    args = ap.parse_args(argv)
    try:
        model = read_lp(Path(args.model).read_text())
    except (OSError, ValueError) as exc:
        print(f"stub-solver: {exc}", file=sys.stderr)
        return 3
    model.seal()
    sol = solve_mip(model, args.engine, mip_gap=args.gap)
    write_solution(model, sol.x if sol.has_solution else None, args.solution,
                   status="optimal" if sol.has_solution else sol.status)
    return 0


if __name__ == "__main__":
    sys.exit(main())
