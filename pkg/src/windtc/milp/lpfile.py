"""CPLEX-style LP file export/import and ``name value`` solution files."""

from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np

from .model import INF, LinExpr, MilpModel

_ALLOWED = re.compile(r"[^A-Za-z0-9!\"#$%&()/,.;?@_`'{}|~]")
_LINE_WIDTH = 240


def lp_name(name: str) -> str:
    """Map a model name onto the LP-file character set."""
    s = name.replace("[", "(").replace("]", ")").replace(" ", "_")
    s = _ALLOWED.sub("_", s)
    if not s or s[0].isdigit() or s[0] in ".eE":
        s = "_" + s
    return s


def _lp_names(model: MilpModel) -> list[str]:
    seen: dict[str, int] = {}
    out = []
    for v in model.vars:
        base = lp_name(v.name)
        k = seen.get(base, 0)
        seen[base] = k + 1
        out.append(base if k == 0 else f"{base}~{k}")
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def _terms(coeffs, names) -> list[str]:
    parts = []
    for v, c in coeffs.items():
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(c))} {names[v.index]}")
    if not parts:
        parts.append(f"+ 0 {names[0]}" if names else "")
    return parts


def _wrap(prefix: str, parts: list[str], suffix: str = "") -> list[str]:
    lines, cur = [], prefix
    for p in parts:
        if len(cur) + len(p) + 1 > _LINE_WIDTH:
            lines.append(cur)
            cur = "   "
        cur += " " + p
    cur += suffix
    lines.append(cur)
    return lines


def write_lp(model: MilpModel, path: str | Path | None = None) -> str:
    """Serialize ``model``; returns the text and writes it if ``path`` is given."""
    names = _lp_names(model)
    out = [f"\\ {model.name}", "Maximize" if model.sense == "max" else "Minimize"]
    obj_terms = dict(model.objective.terms)
    out += _wrap(" obj:", _terms(obj_terms, names) if obj_terms else [f"0 {names[0]}"] if names else [])
    if model.objective.const:
        out.append(f"\\ objective constant {_fmt(model.objective.const)}")
    out.append("Subject To")
    sense_tok = {"<=": "<=", ">=": ">=", "==": "="}
    for k, con in enumerate(model.constrs):
        cname = f"r{k}_" + lp_name(con.name)
        out += _wrap(f" {cname}:", _terms(con.coeffs, names), f" {sense_tok[con.sense]} {_fmt(con.rhs)}")
    out.append("Bounds")
    for v, nm in zip(model.vars, names):
        if v.kind == "B" and v.lb == 0.0 and v.ub == 1.0:
            continue
        if v.lb == -INF and v.ub == INF:
            out.append(f" {nm} free")
        elif v.lb == v.ub:
            out.append(f" {nm} = {_fmt(v.lb)}")
        else:
            lo = "-inf" if v.lb == -INF else _fmt(v.lb)
            hi = "+inf" if v.ub == INF else _fmt(v.ub)
            out.append(f" {lo} <= {nm} <= {hi}")
    bins = [nm for v, nm in zip(model.vars, names) if v.kind == "B"]
    if bins:
        out.append("Binaries")
        out += _wrap("", bins)
    out.append("End")
    text = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


_SECTION = {
    "maximize": "obj", "maximum": "obj", "max": "obj",
    "minimize": "obj", "minimum": "obj", "min": "obj",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "general": "gen", "generals": "gen", "end": "end",
}
_SENSE = re.compile(r"(<=|>=|=<|=>|=)")


def _parse_linear(text: str) -> tuple[dict[str, float], float]:
    terms: dict[str, float] = {}
    const = 0.0
    tokens = re.findall(r"[+-]|[^\s+-]+", text.replace("e+", "E@").replace("e-", "E#"))
    sign, coef = 1.0, None
    for tok in tokens:
        tok = tok.replace("E@", "e+").replace("E#", "e-")
        if tok == "+":
            continue
        if tok == "-":
            sign = -sign
            continue
        try:
            val = float(tok)
            coef = val if coef is None else coef * val
            continue
        except ValueError:
            pass
        terms[tok] = terms.get(tok, 0.0) + sign * (1.0 if coef is None else coef)
        sign, coef = 1.0, None
    if coef is not None:
        const += sign * coef
    return terms, const


def read_lp(text: str) -> MilpModel:
    """Parse the LP subset produced by :func:`write_lp`."""
    model = MilpModel("lpfile")
    section = None
    sense = "min"
    obj_buf: list[str] = []
    rows: list[str] = []
    bounds: list[str] = []
    bins: list[str] = []
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTION:
            section = _SECTION[key]
            if section == "obj":
                sense = "max" if key.startswith("max") else "min"
            if section == "end":
                break
            continue
        if section == "obj":
            obj_buf.append(line)
        elif section == "st":
            if rows and not _SENSE.search(rows[-1]):
                rows[-1] += " " + line
            else:
                rows.append(line)
        elif section == "bounds":
            bounds.append(line)
        elif section in ("bin", "gen"):
            bins.extend(line.split())

    var_order: list[str] = []
    seen = set()

    def note(names):
        for nm in names:
            if nm not in seen:
                seen.add(nm)
                var_order.append(nm)

    obj_text = " ".join(obj_buf)
    if ":" in obj_text:
        obj_text = obj_text.split(":", 1)[1]
    obj_terms, obj_const = _parse_linear(obj_text)
    note(obj_terms)
    parsed_rows = []
    for r in rows:
        name = None
        if re.match(r"^[^\s:]+:", r):
            name, r = r.split(":", 1)
        m = _SENSE.search(r)
        if not m:
            raise ValueError(f"constraint without sense: {r!r}")
        lhs, rhs = r[:m.start()], r[m.end():]
        tok = {"=<": "<=", "=>": ">=", "=": "=="}.get(m.group(1), m.group(1))
        terms, c = _parse_linear(lhs)
        note(terms)
        parsed_rows.append((name, terms, tok, float(rhs) - c))
    note(bins)
    bnd: dict[str, list[float]] = {}
    for b in bounds:
        parts = b.split()
        if len(parts) == 2 and parts[1].lower() == "free":
            bnd[parts[0]] = [-INF, INF]
            note([parts[0]])
        elif len(parts) == 3 and parts[1] == "=":
            bnd[parts[0]] = [float(parts[2])] * 2
            note([parts[0]])
        elif len(parts) == 5:
            lo = -INF if parts[0].lower() in ("-inf", "-infinity") else float(parts[0])
            hi = INF if parts[4].lower() in ("+inf", "inf", "infinity", "+infinity") else float(parts[4])
            bnd[parts[2]] = [lo, hi]
            note([parts[2]])
        elif len(parts) == 3:
            nm, op, val = parts
            cur = bnd.setdefault(nm, [0.0, INF])
            v = float(val.replace("inf", "Infinity")) if "inf" in val.lower() else float(val)
            if op in ("<=", "=<"):
                cur[1] = v
            else:
                cur[0] = v
            note([nm])
        else:
            raise ValueError(f"unsupported bound line {b!r}")
    binset = set(bins)
    handles = {}
    for nm in var_order:
        lo, hi = bnd.get(nm, [0.0, 1.0] if nm in binset else [0.0, INF])
        handles[nm] = model.add_var(nm, lo, hi, "B" if nm in binset else "C")
    model.set_objective(LinExpr({handles[k]: v for k, v in obj_terms.items()}, obj_const), sense)
    for name, terms, tok, rhs in parsed_rows:
        model.add_constr(LinExpr({handles[k]: v for k, v in terms.items()}), tok, rhs, name)
    return model


def write_solution(model: MilpModel, x, path: str | Path | None = None, status: str = "optimal") -> str:
    names = _lp_names(model)
    lines = [f"# status: {status}"]
    if x is not None:
        lines += [f"{nm} {_fmt(val)}" for nm, val in zip(names, x)]
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def read_solution(model: MilpModel, text: str) -> tuple[str, np.ndarray | None]:
    """Parse ``name value`` lines into a vector ordered like ``model.vars``.

    A ``# status: <word>`` comment, when present, overrides the default
    ``optimal`` status; missing variables make the status ``numerical``.
    """
    names = _lp_names(model)
    index = {nm: i for i, nm in enumerate(names)}
    status = None
    x = np.full(len(names), math.nan)
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = re.match(r"#\s*status\s*:\s*(\w+)", line)
            if m:
                status = m.group(1).lower()
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"bad solution line {raw!r}")
        if parts[0] in index:
            x[index[parts[0]]] = float(parts[1])
    if status not in (None, "optimal"):
        return status, None
    if np.isnan(x).any():
        return ("numerical" if status is None or not np.isnan(x).all() else status), None
    return "optimal", x
