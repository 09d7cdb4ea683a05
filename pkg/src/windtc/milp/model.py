"""Linear expressions, variables and the mixed-integer model container."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

INF = math.inf

FEAS_TOL = 1e-7
INT_TOL = 1e-6
DEFAULT_MIP_GAP = 1e-4

SENSES = ("<=", ">=", "==")


class ModelError(ValueError):
    """Raised for ill-formed model construction."""


class Variable:
    """A decision variable owned by a :class:`MilpModel`.

    Variables hash by identity so they can key coefficient dicts.
    """

    __slots__ = ("index", "name", "kind", "lb", "ub")

    def __init__(self, index: int, name: str, kind: str, lb: float, ub: float):
        self.index = index
        self.name = name
        self.kind = kind
        self.lb = lb
        self.ub = ub

    @property
    def is_binary(self) -> bool:
        return self.kind == "B"

    def __repr__(self):
        return f"Variable({self.name!r}, {self.kind}, [{self.lb}, {self.ub}])"

    # arithmetic delegates to LinExpr
    def _expr(self) -> "LinExpr":
        return LinExpr({self: 1.0})

    def __add__(self, other):
        return self._expr() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self._expr() - other

    def __rsub__(self, other):
        return (-1.0) * self._expr() + other

    def __mul__(self, k):
        return self._expr() * k

    __rmul__ = __mul__

    def __neg__(self):
        return self._expr() * -1.0


class LinExpr:
    """Affine expression ``sum(coef * var) + const``."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: Mapping[Variable, float] | None = None, const: float = 0.0):
        self.terms: dict[Variable, float] = dict(terms) if terms else {}
        self.const = float(const)

    @staticmethod
    def of(obj) -> "LinExpr":
        if isinstance(obj, LinExpr):
            return obj
        if isinstance(obj, Variable):
            return LinExpr({obj: 1.0})
        if isinstance(obj, (int, float, np.floating, np.integer)):
            return LinExpr(const=float(obj))
        raise TypeError(f"cannot convert {type(obj).__name__} to LinExpr")

    def copy(self) -> "LinExpr":
        return LinExpr(self.terms, self.const)

    def add_term(self, var: Variable, coef: float) -> "LinExpr":
        """In-place accumulate; returns self for chaining."""
        self.terms[var] = self.terms.get(var, 0.0) + coef
        return self

    def iadd(self, other, scale: float = 1.0) -> "LinExpr":
        other = LinExpr.of(other)
        for v, c in other.terms.items():
            self.terms[v] = self.terms.get(v, 0.0) + scale * c
        self.const += scale * other.const
        return self

    def __add__(self, other):
        return self.copy().iadd(other)

    __radd__ = __add__

    def __sub__(self, other):
        return self.copy().iadd(other, -1.0)

    def __rsub__(self, other):
        return LinExpr.of(other).copy().iadd(self, -1.0)

    def __mul__(self, k):
        if not isinstance(k, (int, float, np.floating, np.integer)):
            raise TypeError("only scalar multiplication is linear")
        k = float(k)
        return LinExpr({v: c * k for v, c in self.terms.items()}, self.const * k)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def value(self, x: np.ndarray) -> float:
        return self.const + sum(c * x[v.index] for v, c in self.terms.items())

    def __repr__(self):
        parts = [f"{c:+g}*{v.name}" for v, c in self.terms.items()]
        if self.const or not parts:
            parts.append(f"{self.const:+g}")
        return " ".join(parts)


def lin_sum(items: Iterable) -> LinExpr:
    """Sum of variables/expressions/numbers without quadratic copying."""
    out = LinExpr()
    for it in items:
        out.iadd(it)
    return out


@dataclass
class LinearConstraint:
    coeffs: dict[Variable, float]
    sense: str
    rhs: float
    name: str
    index: int = -1

    def activity(self, x: np.ndarray) -> float:
        return sum(c * x[v.index] for v, c in self.coeffs.items())

    def violation(self, x: np.ndarray) -> float:
        a = self.activity(x)
        if self.sense == "<=":
            return max(0.0, a - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - a)
        return abs(a - self.rhs)


@dataclass
class ComplementarityPair:
    """Record of one big-M complementarity gadget, kept for auditing."""

    name: str
    var_expr: LinExpr
    slack_expr: LinExpr
    indicator: Variable
    var_bound: float
    slack_bound: float
    audit_var: bool
    audit_slack: bool
    M: float


@dataclass
class MatrixForm:
    """Row-bounded matrix view: ``row_lo <= A x <= row_hi``, ``lb <= x <= ub``."""

    c: np.ndarray
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    obj_const: float
    maximize: bool

    @property
    def shape(self):
        return self.A.shape


class MilpModel:
    """Variables, linear constraints and a linear objective.

    Only continuous and binary variables are supported.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.vars: list[Variable] = []
        self.constrs: list[LinearConstraint] = []
        self.objective = LinExpr()
        self.sense = "min"
        self.complementarities: list[ComplementarityPair] = []
        self._names: set[str] = set()
        self._sealed = False
        self._matrix: MatrixForm | None = None

    # -- construction -------------------------------------------------
    def _check_open(self):
        if self._sealed:
            raise ModelError(f"model {self.name!r} is sealed")

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF, kind: str = "C") -> Variable:
        self._check_open()
        if kind not in ("C", "B"):
            raise ModelError(f"unsupported variable kind {kind!r}")
        if kind == "B":
            lb, ub = max(0.0, lb), min(1.0, ub)
        lb, ub = float(lb), float(ub)
        if math.isnan(lb) or math.isnan(ub) or lb > ub:
            raise ModelError(f"variable {name!r}: bad bounds [{lb}, {ub}]")
        if name in self._names:
            raise ModelError(f"duplicate variable name {name!r}")
        self._names.add(name)
        v = Variable(len(self.vars), name, kind, lb, ub)
        self.vars.append(v)
        return v

    def add_binary(self, name: str) -> Variable:
        return self.add_var(name, 0.0, 1.0, "B")

    def add_constr(self, lhs, sense: str, rhs=0.0, name: str | None = None) -> LinearConstraint:
        """Add ``lhs sense rhs``; both sides may be expressions."""
        self._check_open()
        if sense not in SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        expr = LinExpr.of(lhs) - LinExpr.of(rhs)
        coeffs = {}
        for v, c in expr.terms.items():
            if not math.isfinite(c):
                raise ModelError(f"non-finite coefficient on {v.name}")
            if self.vars[v.index] is not v:
                raise ModelError(f"variable {v.name!r} belongs to another model")
            if c != 0.0:
                coeffs[v] = c
        con = LinearConstraint(coeffs, sense, -expr.const, name or f"c{len(self.constrs)}",
                               len(self.constrs))
        self.constrs.append(con)
        return con

    def set_objective(self, expr, sense: str = "min"):
        self._check_open()
        if sense not in ("min", "max"):
            raise ModelError(f"objective sense must be min or max, got {sense!r}")
        self.objective = LinExpr.of(expr).copy()
        self.sense = sense

    def seal(self) -> "MilpModel":
        self._sealed = True
        return self

    @property
    def sealed(self) -> bool:
        return self._sealed

    # -- queries -------------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.vars)

    @property
    def binaries(self) -> list[Variable]:
        return [v for v in self.vars if v.kind == "B"]

    @property
    def has_integers(self) -> bool:
        return any(v.kind == "B" for v in self.vars)

    def relaxed(self) -> "MilpModel":
        """Copy with every binary turned continuous on the same bounds."""
        out = MilpModel(self.name)
        handles = [out.add_var(v.name, v.lb, v.ub, "C") for v in self.vars]
        for con in self.constrs:
            out.add_constr(LinExpr({handles[v.index]: c for v, c in con.coeffs.items()}),
                           con.sense, con.rhs, con.name)
        out.set_objective(LinExpr({handles[v.index]: c for v, c in self.objective.terms.items()},
                                  self.objective.const), self.sense)
        return out

    def var_by_name(self, name: str) -> Variable:
        for v in self.vars:
            if v.name == name:
                return v
        raise KeyError(name)

    def to_matrix(self) -> MatrixForm:
        if self._matrix is not None and self._sealed:
            return self._matrix
        n, m = len(self.vars), len(self.constrs)
        rows, cols, vals = [], [], []
        row_lo = np.full(m, -INF)
        row_hi = np.full(m, INF)
        for i, con in enumerate(self.constrs):
            for v, c in con.coeffs.items():
                rows.append(i)
                cols.append(v.index)
                vals.append(c)
            if con.sense in ("<=", "=="):
                row_hi[i] = con.rhs
            if con.sense in (">=", "=="):
                row_lo[i] = con.rhs
        A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
        c = np.zeros(n)
        for v, k in self.objective.terms.items():
            c[v.index] += k
        form = MatrixForm(
            c=c,
            A=A,
            row_lo=row_lo,
            row_hi=row_hi,
            lb=np.array([v.lb for v in self.vars], dtype=float),
            ub=np.array([v.ub for v in self.vars], dtype=float),
            integer=np.array([v.kind == "B" for v in self.vars], dtype=bool),
            obj_const=self.objective.const,
            maximize=self.sense == "max",
        )
        if self._sealed:
            self._matrix = form
        return form

    def max_violation(self, x: np.ndarray, constrs: Iterable[LinearConstraint] | None = None) -> float:
        """Largest constraint or bound violation of point ``x``."""
        worst = 0.0
        for con in self.constrs if constrs is None else constrs:
            worst = max(worst, con.violation(x))
        for v in self.vars:
            worst = max(worst, v.lb - x[v.index], x[v.index] - v.ub)
        return worst


@dataclass
class Solution:
    """Result of an LP or MIP solve.

    ``status`` is one of ``optimal``, ``infeasible``, ``unbounded``,
    ``limit`` (time/node limit, possibly with an incumbent) or
    ``numerical``.  ``duals`` are per-constraint sensitivities of the
    objective with respect to the right-hand side, present for pure LPs.
    """

    status: str
    objective: float | None = None
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    bound: float | None = None
    nodes: int = 0
    iterations: int = 0
    seconds: float = 0.0
    backend: str = ""
    bigm_flags: list = field(default_factory=list)

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def has_solution(self) -> bool:
        return self.x is not None

    def __getitem__(self, var: Variable) -> float:
        return float(self.x[var.index])

    def value(self, obj) -> float:
        if isinstance(obj, Variable):
            return float(self.x[obj.index])
        return LinExpr.of(obj).value(self.x)

    def dual(self, con: LinearConstraint) -> float:
        if self.duals is None:
            raise ValueError("no dual values available for this solution")
        return float(self.duals[con.index])

    @property
    def gap(self) -> float | None:
        if self.objective is None or self.bound is None:
            return None
        return abs(self.bound - self.objective) / max(1.0, abs(self.objective))
