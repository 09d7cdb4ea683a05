"""Valid inequalities on switching variables derived from grid structure.

A bus that has demand but no fuel-based generation and no wind site must
stay connected, so at least one incident line is closed (a lone line is
fixed closed).  More generally, if one side of a bus partition cannot cover
its own demand from nameplate generation plus wind capacity limits, at
least one line crossing the partition is closed.  Both hold for every
optimal clearing when shedding is dearer than any generation block and the
no-wind, all-closed clearing needs no shedding.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import networkx as nx

from .grid_data import PowerSystem

log = logging.getLogger(__name__)

DEFICIT_TOL = 1e-9


@dataclass
class CutSet:
    """Switching restrictions of one demand block."""

    t: int
    fixed: set[str] = field(default_factory=set)
    inequalities: list[tuple[str, ...]] = field(default_factory=list)

    def add_fixed(self, line: str):
        self.fixed.add(line)

    def add_inequality(self, lines: Iterable[str]):
        group = tuple(sorted(set(lines)))
        if not group:
            raise ValueError("a cut needs at least one line")
        if len(group) == 1:
            self.fixed.add(group[0])
        elif group not in self.inequalities:
            self.inequalities.append(group)

    def merge(self, other: "CutSet") -> "CutSet":
        for lid in other.fixed:
            self.add_fixed(lid)
        for g in other.inequalities:
            self.add_inequality(g)
        return self

    def normalized(self) -> "CutSet":
        """Drop inequalities already implied by a fixed line."""
        out = CutSet(self.t, set(self.fixed))
        for g in sorted(self.inequalities):
            if not any(lid in self.fixed for lid in g):
                out.add_inequality(g)
        return out

    def __len__(self):
        return len(self.fixed) + len(self.inequalities)

    def lines(self) -> list[str]:
        out = [f"block {self.t}: fix z[{lid}] = 1" for lid in sorted(self.fixed)]
        out += [f"block {self.t}: " + " + ".join(f"z[{lid}]" for lid in g) + " >= 1"
                for g in self.inequalities]
        return out


def _graph(system: PowerSystem) -> nx.MultiGraph:
    g = nx.MultiGraph()
    g.add_nodes_from(system.bus_ids)
    for ln in system.lines:
        g.add_edge(ln.from_bus, ln.to_bus, key=ln.id)
    return g


def degree_cuts(system: PowerSystem, t: int, *, assumptions_ok: bool = True) -> CutSet:
    """Connectivity cuts for pure-load buses of block ``t``."""
    cs = CutSet(t)
    if not assumptions_ok:
        log.warning("degree cuts skipped: assumptions not verified")
        return cs
    D = system.demand(t)
    gen_buses = {g.bus for g in system.generators}
    for i, bus in enumerate(system.buses):
        if D[i] <= 0 or bus.id in gen_buses or bus.id in system.site_buses:
            continue
        inc = system.lines_at(bus.id)
        if not inc or any(not ln.switchable for ln in inc):
            continue  # a permanently closed line already connects the bus
        cs.add_inequality(ln.id for ln in inc)
    return cs


def deficit(system: PowerSystem, t: int, side: Iterable[int]) -> float:
    """Demand of ``side`` not coverable by its nameplate generation and wind limits."""
    D = system.demand(t)
    side = set(side)
    out = 0.0
    for i, bus in enumerate(system.buses):
        if bus.id in side:
            out += D[i] - system.generation_at(bus.id)
    out -= sum(w.cap_max for w in system.wind_sites if w.bus in side)
    return out


def crossing_lines(system: PowerSystem, side: Iterable[int]) -> list[str]:
    side = set(side)
    return [ln.id for ln in system.lines if (ln.from_bus in side) != (ln.to_bus in side)]


def partition_cuts(system: PowerSystem, t: int, partition: tuple[Iterable[int], Iterable[int]]
                   ) -> tuple[str, ...] | None:
    """Lines of which at least one must stay closed, or None if no cut applies."""
    V, W = (set(p) for p in partition)
    every = set(system.bus_ids)
    if not V or not W or V & W or V | W != every:
        raise ValueError("partition sides must be disjoint, non-empty and cover every bus")
    if max(deficit(system, t, V), deficit(system, t, W)) <= DEFICIT_TOL:
        return None
    lines = crossing_lines(system, V)
    if not lines or any(not system.line_by_id[lid].switchable for lid in lines):
        return None
    return tuple(sorted(lines))


def _canonical(side: frozenset, every: frozenset) -> frozenset:
    other = every - side
    return min(side, other, key=lambda s: (len(s), sorted(s)))


def heuristic_partitions(system: PowerSystem, t: int = 0, limit_factor: int = 5
                         ) -> list[tuple[frozenset[int], frozenset[int]]]:
    """Candidate partitions: single buses, connected 2- and 3-bus sets and
    both sides of every bridge, ranked by deficit and capped at
    ``limit_factor * |buses|``."""
    g = nx.Graph(_graph(system))
    every = frozenset(system.bus_ids)
    if len(every) < 2:
        return []
    seen: dict[frozenset, None] = {}

    def note(side):
        side = frozenset(side)
        if side and side != every:
            seen.setdefault(_canonical(side, every), None)

    for b in sorted(every):
        note({b})
    for a, b in sorted(tuple(sorted(e)) for e in g.edges()):
        note({a, b})
    for b in sorted(every):
        for x, y in itertools.combinations(sorted(g.neighbors(b)), 2):
            note({b, x, y})  # paths x-b-y and triangles
    multi = _graph(system)
    for a, b in nx.bridges(g):
        if multi.number_of_edges(a, b) > 1:
            continue  # parallel circuits are not a bridge
        h = g.copy()
        h.remove_edge(a, b)
        note(nx.node_connected_component(h, a))
    cands = list(seen)

    def score(side):
        return max(deficit(system, t, side), deficit(system, t, every - side))

    cands.sort(key=lambda s: (-score(s), len(s), sorted(s)))
    cap = limit_factor * len(every)
    return [(s, every - s) for s in cands[:cap]]


def generate_cuts(system: PowerSystem, *, assumptions_ok: bool | None = None, backend=None) -> list[CutSet]:
    """Degree and partition cuts for every demand block."""
    if assumptions_ok is None:
        from .grid_data import validate_assumptions

        assumptions_ok = validate_assumptions(system, backend=backend).ok
    out = []
    for t in range(system.num_blocks):
        cs = degree_cuts(system, t, assumptions_ok=assumptions_ok)
        if assumptions_ok:
            for V, W in heuristic_partitions(system, t):
                lines = partition_cuts(system, t, (V, W))
                if lines:
                    cs.add_inequality(lines)
        out.append(cs.normalized())
    return out


def cuts_text(cutsets: Sequence[CutSet]) -> str:
    lines = []
    for cs in cutsets:
        lines += cs.lines()
    return "\n".join(lines) + ("\n" if lines else "")


def write_cuts(cutsets: Sequence[CutSet], path: str | Path):
    Path(path).write_text(cuts_text(cutsets))


def parse_cuts(text: str) -> list[CutSet]:
    """Inverse of :func:`cuts_text`."""
    by_t: dict[int, CutSet] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        head, body = line.split(":", 1)
        t = int(head.split()[1])
        cs = by_t.setdefault(t, CutSet(t))
        body = body.strip()
        if body.startswith("fix "):
            cs.add_fixed(body[len("fix z["):body.index("]")])
        else:
            lhs = body.rsplit(">=", 1)[0]
            cs.add_inequality(term.strip()[2:-1] for term in lhs.split("+"))
    return [by_t[t] for t in sorted(by_t)]
