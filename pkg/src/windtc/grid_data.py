"""Power-system data model, JSON instance format and instance generation.

All records are frozen dataclasses; a :class:`PowerSystem` is built once by
:func:`parse_instance` (or :func:`generate_instance`) and then only read.
Annualized wind costs are always derived from ``annualization_rate``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

DEFAULT_ANNUALIZATION = 0.1168
DEFAULT_THETA_MAX = 1.0
DEFAULT_BIGM = 1e6
MAX_FACTOR = 1.5


class InstanceError(ValueError):
    """Base class for instance-document problems."""


class MalformedInstanceError(InstanceError):
    """Wrong structure, missing or unknown keys, non-numeric values."""


class DuplicateIdError(InstanceError):
    """Two buses, lines, generators or wind sites share an id."""


class DanglingReferenceError(InstanceError):
    """A line, generator or wind site points at a bus that does not exist."""


class MissingReferenceBusError(InstanceError):
    """No reference bus given, or it is not one of the buses."""


class InvariantError(InstanceError):
    """Values are well-formed but violate a modelling invariant."""


@dataclass(frozen=True)
class Bus:
    id: int
    demand_base: float
    shed_penalty: float
    is_reference: bool = False


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: int
    to_bus: int
    susceptance: float
    capacity: float
    switchable: bool = True


@dataclass(frozen=True)
class GenBlock:
    capacity: float
    price: float


@dataclass(frozen=True)
class Generator:
    id: str
    bus: int
    blocks: tuple[GenBlock, ...]

    @property
    def capacity(self) -> float:
        return sum(b.capacity for b in self.blocks)


@dataclass(frozen=True)
class WindSite:
    bus: int
    cap_max: float
    invest_cost_per_mw: float
    fixed_cost: float
    base_wind: float = 1.0


@dataclass(frozen=True)
class DemandBlock:
    duration_h: float
    load_factor: float
    wind_factor: float


@dataclass(frozen=True)
class PowerSystem:
    """Immutable grid description plus global planning parameters."""

    name: str
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    wind_sites: tuple[WindSite, ...]
    demand_blocks: tuple[DemandBlock, ...]
    kappa: float
    budget: float
    annualization_rate: float = DEFAULT_ANNUALIZATION
    theta_max: float = DEFAULT_THETA_MAX
    bigM_complementarity: float = DEFAULT_BIGM
    switch_cardinality: int | None = None

    def __post_init__(self):
        _check_system(self)

    # -- identities ----------------------------------------------------
    @property
    def reference_bus(self) -> int:
        return next(b.id for b in self.buses if b.is_reference)

    @cached_property
    def bus_ids(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses)

    @cached_property
    def bus_pos(self) -> dict[int, int]:
        return {b.id: k for k, b in enumerate(self.buses)}

    @cached_property
    def line_by_id(self) -> dict[str, Line]:
        return {ln.id: ln for ln in self.lines}

    @property
    def switchable_lines(self) -> list[Line]:
        return [ln for ln in self.lines if ln.switchable]

    @property
    def num_blocks(self) -> int:
        return len(self.demand_blocks)

    def lines_at(self, bus: int) -> list[Line]:
        return [ln for ln in self.lines if bus in (ln.from_bus, ln.to_bus)]

    @cached_property
    def site_buses(self) -> frozenset[int]:
        return frozenset(w.bus for w in self.wind_sites)

    def generation_at(self, bus: int) -> float:
        """Total nameplate fuel-based capacity at ``bus``."""
        return sum(g.capacity for g in self.generators if g.bus == bus)

    # -- per-block data --------------------------------------------------
    def demand(self, t: int) -> np.ndarray:
        """Bus demands D[i, t] ordered like ``buses``."""
        D, _ = self._discretized
        return D[t]

    def wind_factor(self, t: int) -> np.ndarray:
        """Available wind per MW installed, k[i, t], ordered like ``wind_sites``."""
        _, k = self._discretized
        return k[t]

    @cached_property
    def _discretized(self):
        return discretize_duration_curves(
            [b.demand_base for b in self.buses],
            [w.base_wind for w in self.wind_sites],
            [(d.duration_h, d.load_factor, d.wind_factor) for d in self.demand_blocks],
        )

    @property
    def annual_invest_cost(self) -> np.ndarray:
        return np.array([self.annualization_rate * w.invest_cost_per_mw for w in self.wind_sites])

    @property
    def annual_fixed_cost(self) -> np.ndarray:
        return np.array([self.annualization_rate * w.fixed_cost for w in self.wind_sites])

    @property
    def max_price(self) -> float:
        return max((b.price for g in self.generators for b in g.blocks), default=0.0)

    def with_params(self, **changes) -> "PowerSystem":
        """Copy with top-level fields replaced (re-validated)."""
        return replace(self, **changes)

    def with_lines(self, lines: Sequence[Line]) -> "PowerSystem":
        return self.with_params(lines=tuple(lines))


def _check_system(sys_: PowerSystem):
    if not sys_.buses:
        raise MalformedInstanceError("system has no buses")
    _unique([b.id for b in sys_.buses], "bus")
    _unique([ln.id for ln in sys_.lines], "line")
    _unique([g.id for g in sys_.generators], "generator")
    _unique([w.bus for w in sys_.wind_sites], "wind-site bus")
    refs = [b.id for b in sys_.buses if b.is_reference]
    if len(refs) != 1:
        raise MissingReferenceBusError(f"expected exactly one reference bus, found {len(refs)}")
    bus_set = {b.id for b in sys_.buses}
    for b in sys_.buses:
        if b.demand_base < 0:
            raise InvariantError(f"bus {b.id}: negative demand")
        if b.shed_penalty <= 0:
            raise InvariantError(f"bus {b.id}: shed penalty must be positive")
    for ln in sys_.lines:
        for end in (ln.from_bus, ln.to_bus):
            if end not in bus_set:
                raise DanglingReferenceError(f"line {ln.id} references unknown bus {end}")
        if ln.from_bus == ln.to_bus:
            raise InvariantError(f"line {ln.id} is a self-loop")
        if ln.capacity <= 0 or ln.susceptance <= 0:
            raise InvariantError(f"line {ln.id}: capacity and susceptance must be positive")
    for g in sys_.generators:
        if g.bus not in bus_set:
            raise DanglingReferenceError(f"generator {g.id} references unknown bus {g.bus}")
        if not g.blocks:
            raise InvariantError(f"generator {g.id} has no production blocks")
        for a, b in zip(g.blocks, g.blocks[1:]):
            if not b.price > a.price:
                raise InvariantError(f"generator {g.id}: block prices must strictly increase")
        if any(b.capacity <= 0 for b in g.blocks):
            raise InvariantError(f"generator {g.id}: block capacities must be positive")
    for w in sys_.wind_sites:
        if w.bus not in bus_set:
            raise DanglingReferenceError(f"wind site references unknown bus {w.bus}")
        if w.cap_max <= 0 or w.invest_cost_per_mw < 0 or w.fixed_cost < 0 or w.base_wind < 0:
            raise InvariantError(f"wind site at bus {w.bus}: bad capacity or cost")
    if not sys_.demand_blocks:
        raise InvariantError("at least one demand block is required")
    for d in sys_.demand_blocks:
        if d.duration_h <= 0:
            raise InvariantError("demand block duration must be positive")
        for f in (d.load_factor, d.wind_factor):
            if not 0.0 <= f <= MAX_FACTOR:
                raise InvariantError(f"demand block factor {f} outside [0, {MAX_FACTOR}]")
    if sys_.budget < 0:
        raise InvariantError("budget must be non-negative")
    if sys_.theta_max <= 0 or sys_.bigM_complementarity <= 0 or sys_.kappa < 0:
        raise InvariantError("theta_max and bigM must be positive, kappa non-negative")
    if sys_.switch_cardinality is not None and sys_.switch_cardinality < 0:
        raise InvariantError("switch_cardinality must be non-negative")
    if not _connected(bus_set, sys_.lines):
        raise InvariantError("network is not connected with all lines closed")


def _unique(ids, what):
    seen = set()
    for i in ids:
        if i in seen:
            raise DuplicateIdError(f"duplicate {what} id {i!r}")
        seen.add(i)


def _connected(buses: set, lines) -> bool:
    if len(buses) <= 1:
        return True
    adj: dict[int, set] = {b: set() for b in buses}
    for ln in lines:
        adj[ln.from_bus].add(ln.to_bus)
        adj[ln.to_bus].add(ln.from_bus)
    start = next(iter(buses))
    seen = {start}
    todo = [start]
    while todo:
        for nb in adj[todo.pop()]:
            if nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return len(seen) == len(buses)


# ---------------------------------------------------------------------------
# duration curves

def discretize_duration_curves(base_loads, base_wind, block_spec):
    """Per-block demands ``D[t, i]`` and wind factors ``k[t, s]``.

    ``block_spec`` is a sequence of ``(duration_h, load_factor, wind_factor)``.
    Durations are only validated here; ``sum(duration)`` is the covered
    horizon in hours.
    """
    loads = np.asarray(base_loads, dtype=float)
    wind = np.asarray(base_wind, dtype=float)
    spec = np.asarray(block_spec, dtype=float).reshape(-1, 3)
    if np.any(spec[:, 0] <= 0) or np.any(spec[:, 1:] < 0):
        raise ValueError("durations must be positive and factors non-negative")
    D = np.outer(spec[:, 1], loads)
    k = np.outer(spec[:, 2], wind)
    return D, k


# ---------------------------------------------------------------------------
# JSON format

_TOP = {"name", "kappa", "budget", "annualization_rate", "theta_max", "bigM_complementarity",
        "switch_cardinality", "reference_bus", "buses", "lines", "generators", "wind_sites",
        "demand_blocks"}
_TOP_REQUIRED = {"kappa", "budget", "buses", "lines", "generators", "wind_sites", "demand_blocks"}
_BUS = ({"id", "demand_base", "shed_penalty"}, set())
_LINE = ({"id", "from", "to", "susceptance", "capacity"}, {"switchable"})
_GEN = ({"id", "bus", "blocks"}, set())
_BLOCK = ({"capacity", "price"}, set())
_SITE = ({"bus", "cap_max", "invest_cost_per_mw", "fixed_cost"}, {"base_wind"})
_DBLOCK = ({"duration_h", "load_factor", "wind_factor"}, set())


def _keys(obj, spec, where):
    required, optional = spec
    if not isinstance(obj, dict):
        raise MalformedInstanceError(f"{where}: expected an object")
    missing = required - obj.keys()
    unknown = obj.keys() - required - optional
    if missing:
        raise MalformedInstanceError(f"{where}: missing keys {sorted(missing)}")
    if unknown:
        raise MalformedInstanceError(f"{where}: unknown keys {sorted(unknown)}")


def _num(v, where) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise MalformedInstanceError(f"{where}: expected a finite number, got {v!r}")
    return float(v)


def _int(v, where) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise MalformedInstanceError(f"{where}: expected an integer, got {v!r}")
    return v


def _list(v, where) -> list:
    if not isinstance(v, list):
        raise MalformedInstanceError(f"{where}: expected a list")
    return v


def _id(v, where) -> str:
    if isinstance(v, bool) or not isinstance(v, (str, int)):
        raise MalformedInstanceError(f"{where}: expected a string id")
    return str(v)


def system_from_dict(doc: dict[str, Any]) -> PowerSystem:
    """Build a system from an already-decoded instance object."""
    if not isinstance(doc, dict):
        raise MalformedInstanceError("instance must be a JSON object")
    unknown = doc.keys() - _TOP
    if unknown:
        raise MalformedInstanceError(f"unknown top-level keys {sorted(unknown)}")
    missing = _TOP_REQUIRED - doc.keys()
    if missing:
        raise MalformedInstanceError(f"missing top-level keys {sorted(missing)}")
    if "reference_bus" not in doc or doc["reference_bus"] is None:
        raise MissingReferenceBusError("instance has no reference_bus")
    ref = _int(doc["reference_bus"], "reference_bus")

    buses = []
    for k, b in enumerate(_list(doc["buses"], "buses")):
        _keys(b, _BUS, f"buses[{k}]")
        buses.append(Bus(_int(b["id"], f"buses[{k}].id"), _num(b["demand_base"], f"buses[{k}].demand_base"),
                         _num(b["shed_penalty"], f"buses[{k}].shed_penalty"), b["id"] == ref))
    if ref not in {b.id for b in buses}:
        raise MissingReferenceBusError(f"reference bus {ref} is not among the buses")

    lines = []
    for k, ln in enumerate(_list(doc["lines"], "lines")):
        _keys(ln, _LINE, f"lines[{k}]")
        sw = ln.get("switchable", True)
        if not isinstance(sw, bool):
            raise MalformedInstanceError(f"lines[{k}].switchable must be true/false")
        lines.append(Line(_id(ln["id"], f"lines[{k}].id"), _int(ln["from"], f"lines[{k}].from"),
                          _int(ln["to"], f"lines[{k}].to"), _num(ln["susceptance"], f"lines[{k}].susceptance"),
                          _num(ln["capacity"], f"lines[{k}].capacity"), sw))

    gens = []
    for k, g in enumerate(_list(doc["generators"], "generators")):
        _keys(g, _GEN, f"generators[{k}]")
        blocks = []
        for q, blk in enumerate(_list(g["blocks"], f"generators[{k}].blocks")):
            _keys(blk, _BLOCK, f"generators[{k}].blocks[{q}]")
            blocks.append(GenBlock(_num(blk["capacity"], "block capacity"), _num(blk["price"], "block price")))
        gens.append(Generator(_id(g["id"], f"generators[{k}].id"), _int(g["bus"], f"generators[{k}].bus"),
                              tuple(blocks)))

    sites = []
    for k, w in enumerate(_list(doc["wind_sites"], "wind_sites")):
        _keys(w, _SITE, f"wind_sites[{k}]")
        sites.append(WindSite(_int(w["bus"], f"wind_sites[{k}].bus"), _num(w["cap_max"], "cap_max"),
                              _num(w["invest_cost_per_mw"], "invest_cost_per_mw"),
                              _num(w["fixed_cost"], "fixed_cost"),
                              _num(w.get("base_wind", 1.0), "base_wind")))

    dblocks = []
    for k, d in enumerate(_list(doc["demand_blocks"], "demand_blocks")):
        _keys(d, _DBLOCK, f"demand_blocks[{k}]")
        dblocks.append(DemandBlock(_num(d["duration_h"], "duration_h"), _num(d["load_factor"], "load_factor"),
                                   _num(d["wind_factor"], "wind_factor")))

    card = doc.get("switch_cardinality")
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise MalformedInstanceError("name must be a string")
    return PowerSystem(
        name=name,
        buses=tuple(buses),
        lines=tuple(lines),
        generators=tuple(gens),
        wind_sites=tuple(sites),
        demand_blocks=tuple(dblocks),
        kappa=_num(doc["kappa"], "kappa"),
        budget=_num(doc["budget"], "budget"),
        annualization_rate=_num(doc.get("annualization_rate", DEFAULT_ANNUALIZATION), "annualization_rate"),
        theta_max=_num(doc.get("theta_max", DEFAULT_THETA_MAX), "theta_max"),
        bigM_complementarity=_num(doc.get("bigM_complementarity", DEFAULT_BIGM), "bigM_complementarity"),
        switch_cardinality=None if card is None else _int(card, "switch_cardinality"),
    )


def parse_instance(text: str) -> PowerSystem:
    """Parse a JSON instance document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInstanceError(f"not valid JSON: {exc}") from exc
    return system_from_dict(doc)


def system_to_dict(system: PowerSystem) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "name": system.name,
        "kappa": system.kappa,
        "budget": system.budget,
        "annualization_rate": system.annualization_rate,
        "theta_max": system.theta_max,
        "bigM_complementarity": system.bigM_complementarity,
        "reference_bus": system.reference_bus,
    }
    if system.switch_cardinality is not None:
        doc["switch_cardinality"] = system.switch_cardinality
    doc["buses"] = [{"id": b.id, "demand_base": b.demand_base, "shed_penalty": b.shed_penalty}
                    for b in system.buses]
    doc["lines"] = [{"id": ln.id, "from": ln.from_bus, "to": ln.to_bus, "susceptance": ln.susceptance,
                     "capacity": ln.capacity, "switchable": ln.switchable} for ln in system.lines]
    doc["generators"] = [{"id": g.id, "bus": g.bus,
                          "blocks": [{"capacity": b.capacity, "price": b.price} for b in g.blocks]}
                         for g in system.generators]
    doc["wind_sites"] = [{"bus": w.bus, "cap_max": w.cap_max, "invest_cost_per_mw": w.invest_cost_per_mw,
                          "fixed_cost": w.fixed_cost, "base_wind": w.base_wind} for w in system.wind_sites]
    doc["demand_blocks"] = [{"duration_h": d.duration_h, "load_factor": d.load_factor,
                             "wind_factor": d.wind_factor} for d in system.demand_blocks]
    return doc


def serialize_instance(system: PowerSystem) -> str:
    return json.dumps(system_to_dict(system), indent=1) + "\n"


def load_instance(path: str | Path) -> PowerSystem:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedInstanceError(f"{path}: not UTF-8") from exc
    return parse_instance(text)


BUNDLED = ("six_bus", "six_bus_congested", "three_bus", "rts24")


def load_bundled(name: str) -> PowerSystem:
    """Load one of the instances shipped in ``windtc/data``."""
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled instance {name!r}; choose from {BUNDLED}")
    text = resources.files("windtc").joinpath("data", f"{name}.json").read_text(encoding="utf-8")
    return parse_instance(text)


# ---------------------------------------------------------------------------
# random instances

BLOCK_SHARES = {3: (0.5, 0.3, 0.2), 4: (0.4, 0.3, 0.2, 0.1)}
# increasing, non-overlapping $/MWh ranges for production-block prices
PRICE_RANGES = {3: ((10.0, 20.0), (20.0, 30.0), (30.0, 40.0)),
                4: ((8.0, 16.0), (16.0, 24.0), (24.0, 32.0), (32.0, 40.0))}
CAP_PER_BUDGET = 0.7  # $M per MW used to size the random wind capacity pool


def split_generator(total: float, nblocks: int, rng: np.random.Generator, price_shift: float = 0.0
                    ) -> tuple[GenBlock, ...]:
    """Production blocks of a generator with random increasing prices.

    ``price_shift`` moves every price range up, e.g. for a peaking unit.
    """
    if nblocks not in BLOCK_SHARES:
        raise ValueError(f"only 3- or 4-block generators are supported, got {nblocks}")
    prices = [round(float(rng.uniform(lo, hi)) + price_shift, 2) for lo, hi in PRICE_RANGES[nblocks]]
    return tuple(GenBlock(round(total * s, 9), p) for s, p in zip(BLOCK_SHARES[nblocks], prices))


def allocate_wind_caps(budget: float, nsites: int, rng: np.random.Generator) -> list[float]:
    """Random split of ``budget / 0.7`` MW among the candidate sites."""
    pool = budget / CAP_PER_BUDGET
    share = rng.dirichlet(np.ones(nsites))
    return [round(float(pool * s), 6) for s in share]


def generate_instance(seed: int, template: str = "3bus") -> PowerSystem:
    """Random instance on a bundled topology; deterministic in ``seed``."""
    from .topologies import TEMPLATES

    if template not in TEMPLATES:
        raise KeyError(f"unknown template {template!r}; choose from {sorted(TEMPLATES)}")
    return TEMPLATES[template](np.random.default_rng(seed), seed)


# ---------------------------------------------------------------------------
# assumption checks

@dataclass(frozen=True)
class AssumptionCheck:
    assumption: str  # "penalty" or "no_shedding"
    block: int | None
    passed: bool
    detail: str


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple[AssumptionCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            where = "all blocks" if c.block is None else f"block {c.block}"
            out.append(f"{c.assumption:12s} {where:10s} {'pass' if c.passed else 'FAIL'}  {c.detail}")
        return out


def validate_assumptions(system: PowerSystem, backend=None, tol: float = 1e-6) -> AssumptionReport:
    """Check (i) every shedding penalty exceeds every block price and
    (ii) each block clears without shedding when no wind is built and all
    lines are closed."""
    from .market import min_shedding

    checks = []
    rho = min(b.shed_penalty for b in system.buses)
    pmax = system.max_price
    checks.append(AssumptionCheck("penalty", None, rho > pmax,
                                  f"min shed penalty {rho:g} vs max block price {pmax:g}"))
    for t in range(system.num_blocks):
        shed = min_shedding(system, t, backend=backend)
        checks.append(AssumptionCheck("no_shedding", t, shed is not None and shed <= tol,
                                      "LP failed" if shed is None else f"minimum shedding {shed:.6g} MW"))
    return AssumptionReport(tuple(checks))
