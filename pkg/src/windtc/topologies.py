"""Base topologies used by :func:`windtc.grid_data.generate_instance`.

Each template turns a numpy ``Generator`` into a :class:`PowerSystem`.
Production-block prices and wind capacity limits are random; the network,
base loads and nameplate generation are fixed per template, with mild
multiplicative jitter on the small templates.
"""

from __future__ import annotations

import numpy as np

from .grid_data import (Bus, DemandBlock, Generator, Line, PowerSystem, WindSite, allocate_wind_caps,
                        split_generator)

SHED_PENALTY = 1000.0
PEAKER_SHIFT = 40.0  # $/MWh added to peaking-unit price ranges
WIND_COST_PER_MW = 0.8
WIND_FIXED_MW_EQUIV = 20.0  # fixed cost equals the cost of this many MW

# four-block load/wind duration curve
FOUR_BLOCKS = ((1200.0, 0.93, 0.317), (3600.0, 0.817, 0.306), (2400.0, 0.692, 0.432),
               (1560.0, 0.59, 0.304))
TWO_BLOCKS = ((3000.0, 1.0, 0.4), (5760.0, 0.7, 0.55))


def _buses(demands: dict[int, float], ref: int, rho: float = SHED_PENALTY) -> tuple[Bus, ...]:
    return tuple(Bus(i, float(d), rho, i == ref) for i, d in sorted(demands.items()))


def _sites(buses, caps, cost=WIND_COST_PER_MW) -> tuple[WindSite, ...]:
    return tuple(WindSite(b, cap, cost, cost * WIND_FIXED_MW_EQUIV) for b, cap in zip(buses, caps))


def _blocks(spec) -> tuple[DemandBlock, ...]:
    return tuple(DemandBlock(*row) for row in spec)


# ---------------------------------------------------------------------------
# 3-bus triangle

def three_bus(rng: np.random.Generator, seed: int) -> PowerSystem:
    jit = lambda base, rel=0.2: round(float(base * rng.uniform(1 - rel, 1 + rel)), 4)  # noqa: E731
    # cheap base unit at bus 1, peaker at load bus 2, wind at bus 3 behind a weak 2-3 line;
    # wind injected at bus 3 loads 2-3 in parallel with 1-2, so absorbing it can force the peaker on
    demands = {1: jit(8.0), 2: jit(60.0), 3: jit(10.0)}
    lines = (
        Line("1-2", 1, 2, jit(100.0), jit(45.0, 0.4)),
        Line("1-3", 1, 3, jit(110.0), jit(40.0, 0.4)),
        Line("2-3", 2, 3, jit(90.0), jit(18.0, 0.4)),
    )
    gens = (
        Generator("G1", 1, split_generator(150.0, 4, rng)),
        Generator("G2", 2, split_generator(80.0, 3, rng, price_shift=PEAKER_SHIFT)),
    )
    budget = round(float(rng.uniform(50.0, 90.0)), 2)
    caps = allocate_wind_caps(budget, 1, rng)
    return PowerSystem(
        name=f"three-bus-{seed}",
        buses=_buses(demands, 1),
        lines=lines,
        generators=gens,
        wind_sites=_sites([3], caps),
        demand_blocks=_blocks(TWO_BLOCKS),
        kappa=10.0,
        budget=budget,
        theta_max=1.0,
    )


# ---------------------------------------------------------------------------
# 6-bus illustration network (7 lines, two parallel circuits between 1 and 3)

SIX_BUS_DEMAND = {1: 5.0, 2: 10.0, 3: 0.0, 4: 5.0, 5: 15.0, 6: 10.0}
SIX_BUS_LINES = (("1-2", 1, 2, 80.0), ("1-3a", 1, 3, 60.0), ("1-3b", 1, 3, 60.0), ("1-5", 1, 5, 100.0),
                 ("2-4", 2, 4, 100.0), ("2-6", 2, 6, 70.0), ("3-6", 3, 6, 50.0))


def six_bus(rng: np.random.Generator, seed: int) -> PowerSystem:
    lines = tuple(Line(i, a, b, s, 100.0) for i, a, b, s in SIX_BUS_LINES)
    gens = (Generator("G1", 1, split_generator(30.0, 3, rng)), Generator("G2", 2, split_generator(20.0, 3, rng)))
    return PowerSystem(
        name=f"six-bus-{seed}",
        buses=_buses(SIX_BUS_DEMAND, 1),
        lines=lines,
        generators=gens,
        wind_sites=(WindSite(3, 10.0, WIND_COST_PER_MW, 1.6),),
        demand_blocks=_blocks(((8760.0, 1.0, 1.0),)),
        kappa=10.0,
        budget=10.0,
        theta_max=1.0,
    )


# ---------------------------------------------------------------------------
# 24-bus reliability test system, generation aggregated per bus, x1.5 scaling

RTS_LOAD = {1: 108, 2: 97, 3: 180, 4: 74, 5: 71, 6: 136, 7: 125, 8: 171, 9: 175, 10: 195, 11: 0, 12: 0,
            13: 265, 14: 194, 15: 317, 16: 100, 17: 0, 18: 333, 19: 181, 20: 128, 21: 0, 22: 0, 23: 0, 24: 0}
RTS_GEN = {1: 192, 2: 192, 7: 300, 13: 591, 15: 215, 16: 155, 18: 400, 21: 400, 22: 300, 23: 660}
# (from, to, reactance p.u., rating MW); duplicates are parallel circuits
RTS_BRANCHES = (
    (1, 2, 0.0139, 175), (1, 3, 0.2112, 175), (1, 5, 0.0845, 175), (2, 4, 0.1267, 175),
    (2, 6, 0.1920, 175), (3, 9, 0.1190, 175), (3, 24, 0.0839, 400), (4, 9, 0.1037, 175),
    (5, 10, 0.0883, 175), (6, 10, 0.0605, 175), (7, 8, 0.0614, 175), (8, 9, 0.1651, 175),
    (8, 10, 0.1651, 175), (9, 11, 0.0839, 400), (9, 12, 0.0839, 400), (10, 11, 0.0839, 400),
    (10, 12, 0.0839, 400), (11, 13, 0.0476, 500), (11, 14, 0.0418, 500), (12, 13, 0.0476, 500),
    (12, 23, 0.0966, 500), (13, 23, 0.0865, 500), (14, 16, 0.0389, 500), (15, 16, 0.0173, 500),
    (15, 21, 0.0490, 500), (15, 21, 0.0490, 500), (15, 24, 0.0519, 500), (16, 17, 0.0259, 500),
    (16, 19, 0.0231, 500), (17, 18, 0.0144, 500), (17, 22, 0.1053, 500), (18, 21, 0.0259, 500),
    (18, 21, 0.0259, 500), (19, 20, 0.0396, 500), (19, 20, 0.0396, 500), (20, 23, 0.0216, 500),
    (20, 23, 0.0216, 500), (21, 22, 0.0678, 500),
)
RTS_SCALE = 1.5
RTS_BASE_MVA = 100.0  # flows in MW, so susceptance is base / reactance
RTS_WIND_BUSES = (7, 13, 17, 22, 24)
RTS_BUDGET = 3000.0


def rts_lines(scale: float = RTS_SCALE) -> tuple[Line, ...]:
    out, seen = [], {}
    for a, b, x, rating in RTS_BRANCHES:
        key = f"{a}-{b}"
        seen[key] = seen.get(key, 0) + 1
        lid = key if seen[key] == 1 else f"{key}#{seen[key]}"
        out.append(Line(lid, a, b, round(RTS_BASE_MVA / x, 4), rating * scale))
    # relabel the first of each parallel pair so both circuits carry a suffix
    dup = {k for k, n in seen.items() if n > 1}
    return tuple(Line(f"{ln.id}#1", ln.from_bus, ln.to_bus, ln.susceptance, ln.capacity, ln.switchable)
                 if ln.id in dup else ln for ln in out)


def rts24(rng: np.random.Generator, seed: int) -> PowerSystem:
    demands = {i: d * RTS_SCALE for i, d in RTS_LOAD.items()}
    gens = tuple(Generator(f"G{b}", b, split_generator(cap * RTS_SCALE, 4, rng)) for b, cap in RTS_GEN.items())
    caps = allocate_wind_caps(RTS_BUDGET, len(RTS_WIND_BUSES), rng)
    return PowerSystem(
        name=f"rts24-{seed}",
        buses=_buses(demands, 13),
        lines=rts_lines(),
        generators=gens,
        wind_sites=_sites(RTS_WIND_BUSES, caps),
        demand_blocks=_blocks(FOUR_BLOCKS),
        kappa=10.0,
        budget=RTS_BUDGET,
        theta_max=1.0,
    )


TEMPLATES = {"3bus": three_bus, "6bus": six_bus, "rts24": rts24}
