"""Reference and randomized test systems.

D1 is the small named reference: three buses on a two-line radial network,
two existing units (a thermal and an upstream hydro) and four candidates
(two thermals, a downstream hydro with its own reservoir and a wind farm),
three monthly stages of two typical days with four hours each.
"""

from __future__ import annotations

import numpy as np

from ..scenario import InflowParams, ScenarioSpec, generate, philox
from .system import Hydro, Line, Renewable, SystemData, Thermal

D1_SEED = 20240601
D1_SCENARIOS = 3

# a weekday of 24 days and a weekend of 6 days, each typical hour standing for 6 h
_DAY_WEIGHTS = [[144.0, 36.0]] * 3
_PROFILE = np.array([0.75, 1.0, 1.15, 0.9])  # four 6-hour blocks


def d1_system() -> SystemData:
    T, D, H = 3, 2, 4
    base = np.array([60.0, 110.0, 80.0])  # MW per bus
    demand = np.empty((T, D, H, 3))
    for t, level in enumerate([1.0, 1.08, 0.95]):
        for d, day in enumerate([1.0, 0.85]):
            demand[t, d] = level * day * _PROFILE[:, None] * base[None, :]
    return SystemData(
        name="D1",
        buses=("N", "C", "S"),
        lines=(Line("N-C", "N", "C", susceptance=10.0, limit=90.0),
               Line("C-S", "C", "S", susceptance=8.0, limit=70.0)),
        thermals=(
            Thermal("T-old", "C", capacity=120.0, cost=80.0, ramp=60.0),
            Thermal("T-ccgt", "S", capacity=100.0, cost=45.0, ramp=50.0, existing=False, invest_cost=1.1e6),
            Thermal("T-peak", "C", capacity=80.0, cost=140.0, existing=False, invest_cost=2.5e5),
        ),
        renewables=(Renewable("W-south", "S", capacity=90.0, existing=False, invest_cost=9.0e5),),
        hydros=(
            Hydro("H-up", "N", capacity=70.0, v_min=20.0, v_max=260.0, v0=140.0, productivity=400.0,
                  max_turbine=126.0, max_spill=500.0),
            Hydro("H-down", "N", capacity=60.0, v_min=10.0, v_max=120.0, v0=60.0, productivity=300.0,
                  max_turbine=144.0, max_spill=500.0, upstream=("H-up",), existing=False,
                  invest_cost=1.6e6),
        ),
        hours_per_day=H,
        day_weights=np.array(_DAY_WEIGHTS),
        demand=demand,
        deficit_cost=1000.0,
    )


def d1_spec() -> ScenarioSpec:
    return ScenarioSpec(
        inflows={"H-up": InflowParams(mean=75.0, cv=0.35, phi=0.5),
                 "H-down": InflowParams(mean=20.0, cv=0.35, phi=0.5)},
        seasonality=(1.2, 0.9, 0.7),
        renewable_cv=0.6,
        demand_cv=0.05,
        correlation=0.5,
    )


def d1(n: int = D1_SCENARIOS, seed: int = D1_SEED):
    """(system, scenarios) of the reference instance."""
    sysd = d1_system()
    return sysd, generate(d1_spec(), sysd, n, seed)


def random_instance(seed: int, max_buses: int = 5, max_candidates: int = 6, max_scenarios: int = 5,
                    n_scenarios: int | None = None, storage_tight: bool = False):
    """Small seeded random system plus its scenario spec.

    Returns ``(system, spec)``.  Buses form a random spanning tree; there is
    always one existing thermal so that lost load is not the only option.
    ``storage_tight`` shrinks the reservoirs so that water must be rationed
    across stages, which is where the decision rule bites.
    """
    rng = philox(seed)
    NB = int(rng.integers(2, max_buses + 1))
    buses = tuple(f"b{i}" for i in range(NB))
    lines = []
    for i in range(1, NB):
        j = int(rng.integers(0, i))
        lim = float(np.round(rng.uniform(60, 160)))
        lines.append(Line(f"l{j}-{i}", buses[j], buses[i], susceptance=float(np.round(rng.uniform(5, 15), 2)),
                          limit=lim))
    T, D, H = 3, 2, 2
    n_cand = int(rng.integers(2, max_candidates + 1))
    hydro_prod = 350.0

    def bus():
        return buses[int(rng.integers(0, NB))]

    thermals = [Thermal("t0", bus(), capacity=float(np.round(rng.uniform(90, 140))),
                        cost=float(np.round(rng.uniform(90, 130))), ramp=None)]
    renewables, hydros = [], []
    vmax = 60.0 if storage_tight else 250.0
    hydros.append(Hydro("h0", bus(), capacity=float(np.round(rng.uniform(40, 80))), v_min=5.0, v_max=vmax,
                        v0=vmax / 2, productivity=hydro_prod, max_turbine=150.0, max_spill=600.0))
    kinds = rng.choice(["thermal", "renewable", "hydro"], size=n_cand, p=[0.45, 0.35, 0.2])
    if "hydro" not in kinds and storage_tight:
        kinds[-1] = "hydro"
    for c, kind in enumerate(kinds):
        if kind == "thermal":
            thermals.append(Thermal(f"t{c + 1}", bus(), capacity=float(np.round(rng.uniform(40, 100))),
                                    cost=float(np.round(rng.uniform(30, 160))),
                                    ramp=float(np.round(rng.uniform(20, 60))) if rng.random() < 0.5 else None,
                                    existing=False, invest_cost=float(np.round(rng.uniform(1e5, 1.5e6), -3))))
        elif kind == "renewable":
            renewables.append(Renewable(f"r{c + 1}", bus(), capacity=float(np.round(rng.uniform(40, 110))),
                                        existing=False, invest_cost=float(np.round(rng.uniform(3e5, 1.2e6), -3))))
        else:
            n_h = len(hydros)
            up = (hydros[int(rng.integers(0, n_h))].name,) if rng.random() < 0.6 else ()
            hv = vmax * float(rng.uniform(0.5, 1.0))
            hydros.append(Hydro(f"h{c + 1}", bus(), capacity=float(np.round(rng.uniform(30, 70))),
                                v_min=2.0, v_max=float(np.round(hv)), v0=float(np.round(hv / 2)),
                                productivity=float(np.round(rng.uniform(250, 400))), max_turbine=150.0,
                                max_spill=600.0, upstream=up, existing=False,
                                invest_cost=float(np.round(rng.uniform(5e5, 2e6), -3))))
    base = rng.uniform(30, 80, size=NB)
    profile = np.array([0.85, 1.15])
    demand = np.empty((T, D, H, NB))
    for t in range(T):
        for d in range(D):
            demand[t, d] = (1 + 0.08 * t) * (1.0 - 0.15 * d) * profile[:, None] * base[None, :]
    system = SystemData(
        name=f"random-{seed}", buses=buses, lines=tuple(lines), thermals=tuple(thermals),
        renewables=tuple(renewables), hydros=tuple(hydros), hours_per_day=H,
        day_weights=np.array([[264.0, 96.0]] * T), demand=np.round(demand, 3),
    )
    spec = ScenarioSpec(
        inflows={h.name: InflowParams(mean=(45.0 if storage_tight else 60.0) * (1 if i == 0 else 0.4),
                                      cv=0.45 if storage_tight else 0.3, phi=0.5)
                 for i, h in enumerate(hydros)},
        seasonality=(1.3, 0.85, 0.6),
        renewable_cv=0.6, demand_cv=0.05, correlation=0.5,
    )
    if n_scenarios is None:
        n_scenarios = int(rng.integers(2, max_scenarios + 1))
    system.extra["n_scenarios"] = n_scenarios
    return system, spec


def random_case(seed: int, **kw):
    """(system, scenarios) drawn from :func:`random_instance`."""
    system, spec = random_instance(seed, **kw)
    return system, generate(spec, system, system.extra["n_scenarios"], seed + 1)


def storage_tight_instance(seed: int):
    """Hydro-dominated two-bus system whose water, not capacity, is scarce.

    Firm capacity covers the peak, but the reservoir holds about one stage of
    mean inflow, so releases must be rationed against an uncertain future.
    The candidates (cheaper thermals and a wind farm) are priced near their
    operating value, so whether to build them depends on how well water can
    be managed.  Returns ``(system, spec)``.
    """
    rng = philox(seed)
    T, D, H = 3, 2, 2
    buses = ("b0", "b1")
    lines = (Line("l0-1", "b0", "b1", susceptance=10.0, limit=float(np.round(rng.uniform(80, 140)))),)
    hcap = float(np.round(rng.uniform(90, 130)))
    vmax = float(np.round(rng.uniform(50, 80)))
    hydros = (Hydro("h0", "b0", capacity=hcap, v_min=5.0, v_max=vmax, v0=float(np.round(vmax / 2)),
                    productivity=350.0, max_turbine=250.0, max_spill=600.0),)
    thermals = [Thermal("t0", "b1", capacity=80.0, cost=float(np.round(rng.uniform(160, 220))))]
    renewables = []
    for c in range(int(rng.integers(2, 4))):
        cap = float(np.round(rng.uniform(20, 50)))
        cost = float(np.round(rng.uniform(60, 120)))
        # roughly the fuel saving of running half the year against the existing unit
        value = cap * 0.5 * 3 * 360.0 * (thermals[0].cost - cost)
        thermals.append(Thermal(f"t{c + 1}", buses[int(rng.integers(0, 2))], capacity=cap, cost=cost,
                                existing=False, invest_cost=float(np.round(value * rng.uniform(0.4, 1.2), -3))))
    wcap = float(np.round(rng.uniform(30, 60)))
    renewables.append(Renewable("w1", "b1", capacity=wcap, existing=False,
                                invest_cost=float(np.round(wcap * 0.4 * 3 * 360.0 * 150.0 * rng.uniform(0.4, 1.2),
                                                           -3))))
    base = np.array([rng.uniform(50, 70), rng.uniform(40, 60)])
    profile = np.array([0.85, 1.15])
    demand = np.empty((T, D, H, 2))
    for t in range(T):
        for d in range(D):
            demand[t, d] = (1.0 - 0.1 * d) * profile[:, None] * base[None, :]
    system = SystemData(
        name=f"tight-{seed}", buses=buses, lines=lines, thermals=tuple(thermals),
        renewables=tuple(renewables), hydros=hydros, hours_per_day=H,
        day_weights=np.array([[264.0, 96.0]] * T), demand=np.round(demand, 3),
    )
    spec = ScenarioSpec(
        inflows={"h0": InflowParams(mean=float(np.round(vmax * rng.uniform(0.8, 1.2))), cv=0.5, phi=0.6)},
        seasonality=(1.3, 0.9, 0.6),
        renewable_cv=0.6, demand_cv=0.05, correlation=0.5,
    )
    return system, spec
