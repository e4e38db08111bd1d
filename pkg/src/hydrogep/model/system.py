"""Hydrothermal system description, JSON persistence and validation."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

SCHEMA_VERSION = "gep-system/1"


@dataclass(frozen=True)
class Line:
    name: str
    from_bus: str
    to_bus: str
    susceptance: float
    limit: Optional[float] = None  # MW, None = unlimited


@dataclass(frozen=True)
class Thermal:
    name: str
    bus: str
    capacity: float
    cost: float  # $/MWh
    ramp: Optional[float] = None  # MW/h, None = unlimited
    existing: bool = True
    invest_cost: float = 0.0


@dataclass(frozen=True)
class Renewable:
    """Zero-cost unit; its hourly capacity factor comes from the scenario set under ``name``."""

    name: str
    bus: str
    capacity: float
    existing: bool = True
    invest_cost: float = 0.0


@dataclass(frozen=True)
class Hydro:
    name: str
    bus: str
    capacity: float  # MW
    v_min: float  # hm3
    v_max: float
    v0: float
    productivity: float  # MWh per hm3 turbined
    max_turbine: float  # hm3 per stage
    max_spill: float  # hm3 per stage
    upstream: tuple = ()
    existing: bool = True
    invest_cost: float = 0.0


@dataclass(frozen=True)
class SystemData:
    name: str
    buses: tuple
    lines: tuple
    thermals: tuple
    renewables: tuple
    hydros: tuple
    hours_per_day: int
    day_weights: np.ndarray  # (T, D): hours of the month each hour of day d stands for
    demand: np.ndarray  # (T, D, hours_per_day, n_buses) MW
    stage_hours: Optional[np.ndarray] = None  # (T,), defaults to day_weights sum * hours
    deficit_cost: float = 1000.0
    ldr_penalty: Optional[float] = None  # $/hm3 for departing from the decision rule
    overflow_cost: float = 1.0  # $/hm3 for water leaving the cascade uncontrolled
    ldr_slope_bound: float = 10.0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "day_weights", np.asarray(self.day_weights, dtype=float))
        object.__setattr__(self, "demand", np.asarray(self.demand, dtype=float))
        if self.stage_hours is None:
            sh = self.day_weights.sum(axis=1) * self.hours_per_day
        else:
            sh = np.asarray(self.stage_hours, dtype=float)
        object.__setattr__(self, "stage_hours", sh)
        for name in ("buses", "lines", "thermals", "renewables", "hydros"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    # -- dimensions -----------------------------------------------------

    @property
    def n_stages(self) -> int:
        return self.day_weights.shape[0]

    @property
    def n_days(self) -> int:
        return self.day_weights.shape[1]

    @property
    def units(self) -> list:
        """All generating units in first-stage order: thermals, renewables, hydros."""
        return [*self.thermals, *self.renewables, *self.hydros]

    def bus_index(self, bus: str) -> int:
        return self.buses.index(bus)

    def hydro_index(self, name: str) -> int:
        return [h.name for h in self.hydros].index(name)

    def cascade_productivity(self, h: int) -> float:
        """Productivity summed along the path from hydro ``h`` to the river mouth."""
        down = {}
        for i, hy in enumerate(self.hydros):
            for up in hy.upstream:
                down.setdefault(self.hydro_index(up), []).append(i)
        total, seen, stack = 0.0, set(), [h]
        while stack:
            i = stack.pop()
            if i in seen:
                continue
            seen.add(i)
            total += self.hydros[i].productivity
            stack.extend(down.get(i, []))
        return total

    @property
    def effective_ldr_penalty(self) -> float:
        if self.ldr_penalty is not None:
            return float(self.ldr_penalty)
        if not self.hydros:
            return 0.0
        prod = max(self.cascade_productivity(h) for h in range(len(self.hydros)))
        return 2.0 * self.deficit_cost * prod

    def with_units(self, **changes) -> "SystemData":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return SystemData(**d)

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(system_to_dict(self), sort_keys=True).encode()).hexdigest()[:16]


# -- JSON ------------------------------------------------------------------


def system_to_dict(s: SystemData) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "name": s.name,
        "buses": list(s.buses),
        "lines": [asdict(x) for x in s.lines],
        "thermals": [asdict(x) for x in s.thermals],
        "renewables": [asdict(x) for x in s.renewables],
        "hydros": [{**asdict(x), "upstream": list(x.upstream)} for x in s.hydros],
        "hours_per_day": s.hours_per_day,
        "day_weights": s.day_weights.tolist(),
        "stage_hours": s.stage_hours.tolist(),
        "demand": {b: s.demand[..., i].tolist() for i, b in enumerate(s.buses)},
        "deficit_cost": s.deficit_cost,
        "ldr_penalty": s.ldr_penalty,
        "overflow_cost": s.overflow_cost,
        "ldr_slope_bound": s.ldr_slope_bound,
    }


def system_from_dict(doc: dict) -> SystemData:
    import jsonschema

    jsonschema.validate(doc, system_schema())
    buses = tuple(doc["buses"])
    T = len(doc["day_weights"])
    D = len(doc["day_weights"][0])
    H = int(doc["hours_per_day"])
    demand = np.zeros((T, D, H, len(buses)))
    for i, b in enumerate(buses):
        val = doc["demand"].get(b, 0.0)
        demand[..., i] = np.broadcast_to(np.asarray(val, dtype=float), (T, D, H))
    return SystemData(
        name=doc.get("name", "system"),
        buses=buses,
        lines=tuple(Line(**x) for x in doc.get("lines", [])),
        thermals=tuple(Thermal(**x) for x in doc.get("thermals", [])),
        renewables=tuple(Renewable(**x) for x in doc.get("renewables", [])),
        hydros=tuple(Hydro(**{**x, "upstream": tuple(x.get("upstream", ()))}) for x in doc.get("hydros", [])),
        hours_per_day=H,
        day_weights=np.asarray(doc["day_weights"], dtype=float),
        stage_hours=np.asarray(doc["stage_hours"], dtype=float) if "stage_hours" in doc else None,
        demand=demand,
        deficit_cost=float(doc.get("deficit_cost", 1000.0)),
        ldr_penalty=doc.get("ldr_penalty"),
        overflow_cost=float(doc.get("overflow_cost", 1.0)),
        ldr_slope_bound=float(doc.get("ldr_slope_bound", 10.0)),
    )


def system_schema() -> dict:
    return json.loads(resources.files("hydrogep.data").joinpath("gep-system-1.schema.json").read_text())


def load_system(path) -> SystemData:
    with open(path, encoding="utf-8") as fh:
        return system_from_dict(json.load(fh))


def save_system(system: SystemData, path) -> None:
    Path(path).write_text(json.dumps(system_to_dict(system), indent=1), encoding="utf-8")


# -- validation --------------------------------------------------------------


def _cycle_members(hydros) -> list:
    names = [h.name for h in hydros]
    graph = {h.name: [u for u in h.upstream if u in names] for h in hydros}
    WHITE, GREY, BLACK = 0, 1, 2
    color = dict.fromkeys(names, WHITE)
    found = []

    def visit(v, path):
        color[v] = GREY
        path.append(v)
        for w in graph[v]:
            if color[w] == GREY:
                found.append(path[path.index(w):].copy())
            elif color[w] == WHITE:
                visit(w, path)
        path.pop()
        color[v] = BLACK

    for v in names:
        if color[v] == WHITE:
            visit(v, [])
    return found


def validate(system: SystemData) -> list:
    """Return human-readable diagnostics; an empty list means the system is well formed."""
    diags = []
    buses = set(system.buses)
    if len(buses) != len(system.buses):
        diags.append("duplicate bus names")
    if not system.buses:
        diags.append("system has no buses")
    names = [u.name for u in system.units] + [ln.name for ln in system.lines]
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        diags.append(f"duplicate entity names: {', '.join(dup)}")

    for ln in system.lines:
        for end in (ln.from_bus, ln.to_bus):
            if end not in buses:
                diags.append(f"line {ln.name}: unknown bus {end}")
        if ln.from_bus == ln.to_bus:
            diags.append(f"line {ln.name}: both ends at bus {ln.from_bus}")
        if ln.susceptance <= 0:
            diags.append(f"line {ln.name}: susceptance must be positive")
        if ln.limit is not None and ln.limit < 0:
            diags.append(f"line {ln.name}: negative flow limit")

    for u in system.units:
        if u.bus not in buses:
            diags.append(f"unit {u.name}: unknown bus {u.bus}")
        if u.capacity < 0:
            diags.append(f"unit {u.name}: negative capacity")
        if u.invest_cost < 0:
            diags.append(f"unit {u.name}: negative investment cost")
    for th in system.thermals:
        if th.cost < 0:
            diags.append(f"thermal {th.name}: negative variable cost")
        if th.ramp is not None and th.ramp < 0:
            diags.append(f"thermal {th.name}: negative ramp limit")

    hnames = [h.name for h in system.hydros]
    for h in system.hydros:
        if h.productivity <= 0:
            diags.append(f"hydro {h.name}: productivity must be positive")
        for fld in ("v_min", "v_max", "v0", "max_turbine", "max_spill"):
            if getattr(h, fld) < 0:
                diags.append(f"hydro {h.name}: negative {fld}")
        if not (h.v_min <= h.v0 <= h.v_max):
            diags.append(f"hydro {h.name}: initial storage outside [v_min, v_max]")
        for up in h.upstream:
            if up not in hnames:
                diags.append(f"hydro {h.name}: unknown upstream hydro {up}")
    seen_cycles = set()
    for cyc in _cycle_members(system.hydros):
        key = frozenset(cyc)
        if key in seen_cycles:
            continue
        seen_cycles.add(key)
        diags.append(f"cascade cycle through hydro {' -> '.join(cyc)}")

    dw = system.day_weights
    if dw.ndim != 2 or dw.size == 0:
        diags.append("day_weights must be a non-empty stage x day table")
    else:
        if (dw < 0).any():
            diags.append("negative typical-day weight")
        represented = dw.sum(axis=1) * system.hours_per_day
        for t, (got, want) in enumerate(zip(represented, system.stage_hours)):
            if abs(got - want) > 1e-6 * max(1.0, want):
                diags.append(f"stage {t}: typical days cover {got:g} h but the stage has {want:g} h")
        shape = (dw.shape[0], dw.shape[1], system.hours_per_day, len(system.buses))
        if system.demand.shape != shape:
            diags.append(f"demand shape {system.demand.shape} != {shape}")
        elif (system.demand < 0).any():
            diags.append("negative demand")
    if system.deficit_cost < 0:
        diags.append("negative deficit cost")
    if system.overflow_cost < 0:
        diags.append("negative overflow cost")
    return diags
