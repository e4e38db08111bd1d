"""Synthetic scenarios for inflows, renewable capacity factors and demand.

Random streams come from numpy's Philox 4x64 counter-based generator, which is
specified bit-for-bit and therefore identical on every platform.  Draws are
taken in a fixed order (inflow innovations, renewable noise, demand common
shocks, demand idiosyncratic noise) so adding entities never reorders them.

CSV layout (UTF-8, comma separated, header required)::

    scenario,kind,entity,stage,day,hour,value

``kind`` is one of ``probability`` (entity/stage/day/hour empty),
``inflow`` (entity = hydro, stage), ``capacity_factor`` (entity = renewable,
stage, day, hour), ``demand_multiplier`` (entity = bus, stage, day, hour) or
``meta`` (scenario empty, entity = key, value = text).  Values are written
with 12 significant digits.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

CSV_HEADER = ["scenario", "kind", "entity", "stage", "day", "hour", "value"]
KINDS = ("probability", "inflow", "capacity_factor", "demand_multiplier", "meta")


class ScenarioFormatError(ValueError):
    pass


def philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def round12(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    flat = [float(f"{v:.12g}") for v in a.ravel().tolist()]
    return np.asarray(flat, dtype=float).reshape(a.shape)


def _fmt(v: float) -> str:
    return f"{v:.12g}"


@dataclass(frozen=True)
class ScenarioSet:
    prob: np.ndarray  # (S,)
    inflow: np.ndarray  # (S, T, n_hydro) hm3 per stage
    capacity_factor: np.ndarray  # (S, T, D, H, n_renewable)
    demand_mult: np.ndarray  # (S, T, D, H, n_bus)
    hydro_names: tuple = ()
    renewable_names: tuple = ()
    bus_names: tuple = ()
    seed: Optional[int] = None
    spec_fingerprint: str = ""

    def __post_init__(self):
        for f in ("prob", "inflow", "capacity_factor", "demand_mult"):
            object.__setattr__(self, f, np.asarray(getattr(self, f), dtype=float))
        for f in ("hydro_names", "renewable_names", "bus_names"):
            object.__setattr__(self, f, tuple(getattr(self, f)))
        S = self.prob.size
        if S == 0:
            raise ValueError("a scenario set needs at least one scenario")
        if self.inflow.ndim != 3 or self.capacity_factor.ndim != 5 or self.demand_mult.ndim != 5:
            raise ValueError("scenario arrays have the wrong rank")
        if not (self.inflow.shape[0] == self.capacity_factor.shape[0] == self.demand_mult.shape[0] == S):
            raise ValueError("scenario arrays disagree on the scenario count")
        if self.inflow.shape[2] != len(self.hydro_names):
            raise ValueError("inflow columns do not match hydro names")
        if self.capacity_factor.shape[4] != len(self.renewable_names):
            raise ValueError("capacity-factor columns do not match renewable names")
        if self.demand_mult.shape[4] != len(self.bus_names):
            raise ValueError("demand columns do not match bus names")
        if abs(self.prob.sum() - 1.0) > 1e-12 or (self.prob < 0).any():
            raise ValueError("scenario probabilities must be nonnegative and sum to one")
        if (self.inflow < 0).any():
            raise ValueError("negative inflow")
        if ((self.capacity_factor < 0) | (self.capacity_factor > 1)).any():
            raise ValueError("capacity factor outside [0, 1]")
        if (self.demand_mult <= 0).any():
            raise ValueError("demand multipliers must be positive")

    @property
    def count(self) -> int:
        return self.prob.size

    @property
    def n_stages(self) -> int:
        return self.demand_mult.shape[1]

    def subset(self, idx, prob=None) -> "ScenarioSet":
        idx = np.asarray(idx, dtype=int)
        p = np.full(idx.size, 1.0 / idx.size) if prob is None else np.asarray(prob, dtype=float)
        return ScenarioSet(
            prob=p, inflow=self.inflow[idx], capacity_factor=self.capacity_factor[idx],
            demand_mult=self.demand_mult[idx], hydro_names=self.hydro_names,
            renewable_names=self.renewable_names, bus_names=self.bus_names,
            seed=self.seed, spec_fingerprint=self.spec_fingerprint,
        )

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for a in (self.prob, self.inflow, self.capacity_factor, self.demand_mult):
            h.update(np.ascontiguousarray(a).tobytes())
            h.update(str(a.shape).encode())
        h.update("|".join(self.hydro_names + self.renewable_names + self.bus_names).encode())
        return h.hexdigest()[:16]

    def equals(self, other: "ScenarioSet") -> bool:
        return (
            self.hydro_names == other.hydro_names
            and self.renewable_names == other.renewable_names
            and self.bus_names == other.bus_names
            and all(np.array_equal(getattr(self, f), getattr(other, f))
                    for f in ("prob", "inflow", "capacity_factor", "demand_mult"))
        )


@dataclass(frozen=True)
class InflowParams:
    mean: float  # hm3 per stage before seasonality
    cv: float = 0.3
    phi: float = 0.5


@dataclass(frozen=True)
class ScenarioSpec:
    inflows: dict = field(default_factory=dict)  # hydro name -> InflowParams
    default_inflow: InflowParams = InflowParams(mean=100.0)
    seasonality: tuple = ()  # per-stage multiplier, empty = flat
    renewable_shape: tuple = ()  # per-hour mean capacity factor, empty = solar-like bump
    renewable_cv: float = 0.5  # std of the logit noise
    demand_cv: float = 0.05
    correlation: float = 0.5  # inflow innovation vs renewable noise

    def __post_init__(self):
        object.__setattr__(self, "inflows", {
            k: v if isinstance(v, InflowParams) else InflowParams(**v) for k, v in dict(self.inflows).items()
        })
        if isinstance(self.default_inflow, dict):
            object.__setattr__(self, "default_inflow", InflowParams(**self.default_inflow))
        object.__setattr__(self, "seasonality", tuple(float(v) for v in self.seasonality))
        object.__setattr__(self, "renewable_shape", tuple(float(v) for v in self.renewable_shape))

    def check(self):
        for name, p in [("default", self.default_inflow), *self.inflows.items()]:
            if p.mean < 0:
                raise ValueError(f"inflow mean for {name} is negative")
            if p.cv < 0:
                raise ValueError(f"inflow cv for {name} is negative")
            if not 0.0 <= p.phi < 1.0:
                raise ValueError(f"autocorrelation for {name} must lie in [0, 1)")
        if self.renewable_cv < 0 or self.demand_cv < 0:
            raise ValueError("noise coefficients of variation must be nonnegative")
        if abs(self.correlation) > 1:
            raise ValueError("correlation must lie in [-1, 1]")
        if any(v <= 0 for v in self.seasonality):
            raise ValueError("seasonal multipliers must be positive")
        if any(not 0.0 < v < 1.0 for v in self.renewable_shape):
            raise ValueError("renewable shape values must lie strictly inside (0, 1)")

    def to_dict(self) -> dict:
        return {
            "inflows": {k: asdict(v) for k, v in sorted(self.inflows.items())},
            "default_inflow": asdict(self.default_inflow),
            "seasonality": list(self.seasonality),
            "renewable_shape": list(self.renewable_shape),
            "renewable_cv": self.renewable_cv,
            "demand_cv": self.demand_cv,
            "correlation": self.correlation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = dict(d)
        d["inflows"] = {k: InflowParams(**v) for k, v in d.get("inflows", {}).items()}
        if "default_inflow" in d:
            d["default_inflow"] = InflowParams(**d["default_inflow"])
        return cls(**d)

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def _default_shape(hours: int) -> np.ndarray:
    # solar-like bump over the typical day, kept strictly inside (0, 1)
    k = (np.arange(hours) + 0.5) / hours
    return 0.05 + 0.8 * np.sin(np.pi * k) ** 2


def lognormal_sigma(cv: float) -> float:
    return float(np.sqrt(np.log1p(cv * cv)))


def generate(spec: ScenarioSpec, system, n: int, seed: int) -> ScenarioSet:
    """Draw ``n`` equiprobable scenarios for ``system``; deterministic in (spec, n, seed)."""
    if n < 1:
        raise ValueError("need at least one scenario")
    spec.check()
    T, D, H = system.n_stages, system.n_days, system.hours_per_day
    hydros = [h.name for h in system.hydros]
    rens = [r.name for r in system.renewables]
    buses = list(system.buses)
    NH, NR, NB = len(hydros), len(rens), len(buses)
    season = np.ones(T)
    if spec.seasonality:
        reps = int(np.ceil(T / len(spec.seasonality)))
        season = np.tile(np.asarray(spec.seasonality), reps)[:T]
    shape = np.asarray(spec.renewable_shape) if spec.renewable_shape else _default_shape(H)
    if shape.size != H:
        raise ValueError(f"renewable shape has {shape.size} hours, system has {H}")

    rng = philox(seed)
    eps = rng.standard_normal((n, T, NH))
    ren_noise = rng.standard_normal((n, T, D, H, NR))
    dem_common = rng.standard_normal((n, T))
    dem_idio = rng.standard_normal((n, T, D, H, NB))

    inflow = np.empty((n, T, NH))
    for j, name in enumerate(hydros):
        p = spec.inflows.get(name, spec.default_inflow)
        sigma = lognormal_sigma(p.cv)
        z = np.empty((n, T))
        z[:, 0] = eps[:, 0, j]
        innov = np.sqrt(1.0 - p.phi ** 2)
        for t in range(1, T):
            z[:, t] = p.phi * z[:, t - 1] + innov * eps[:, t, j]
        inflow[:, :, j] = p.mean * season[None, :] * np.exp(sigma * z - 0.5 * sigma ** 2)

    if NH:
        common = eps.sum(axis=2) / np.sqrt(NH)  # stage inflow innovation, N(0, 1)
    else:
        common = np.zeros((n, T))
    rho = spec.correlation if NH else 0.0
    noise = spec.renewable_cv * (rho * common[:, :, None, None, None]
                                 + np.sqrt(1.0 - rho * rho) * ren_noise)
    logit = np.log(shape / (1.0 - shape))[None, None, None, :, None]
    cf = 1.0 / (1.0 + np.exp(-(logit + noise)))

    sd = lognormal_sigma(spec.demand_cv)
    mix = 0.8 * dem_common[:, :, None, None, None] + 0.6 * dem_idio
    mult = np.exp(sd * mix - 0.5 * sd * sd)

    return ScenarioSet(
        prob=np.full(n, 1.0 / n),
        inflow=round12(inflow),
        capacity_factor=np.clip(round12(cf), 0.0, 1.0),
        demand_mult=round12(mult),
        hydro_names=tuple(hydros), renewable_names=tuple(rens), bus_names=tuple(buses),
        seed=int(seed), spec_fingerprint=spec.fingerprint(),
    )


def deterministic(system, n: int = 1, inflow=None) -> ScenarioSet:
    """``n`` identical scenarios: unit multipliers, capacity factor 1, given inflows."""
    T, D, H = system.n_stages, system.n_days, system.hours_per_day
    NH, NR, NB = len(system.hydros), len(system.renewables), len(system.buses)
    a = np.zeros((T, NH)) if inflow is None else np.broadcast_to(np.asarray(inflow, float), (T, NH))
    return ScenarioSet(
        prob=np.full(n, 1.0 / n),
        inflow=np.broadcast_to(a, (n, T, NH)).copy(),
        capacity_factor=np.ones((n, T, D, H, NR)),
        demand_mult=np.ones((n, T, D, H, NB)),
        hydro_names=tuple(h.name for h in system.hydros),
        renewable_names=tuple(r.name for r in system.renewables),
        bus_names=tuple(system.buses),
    )


def split(scen: ScenarioSet, n_in: int, seed: int):
    """Random disjoint split into (in-sample, out-of-sample), each equiprobable."""
    if not 1 <= n_in < scen.count:
        raise ValueError(f"n_in must lie in [1, {scen.count - 1}], got {n_in}")
    perm = philox(seed).permutation(scen.count)
    return scen.subset(np.sort(perm[:n_in])), scen.subset(np.sort(perm[n_in:]))


# -- CSV -------------------------------------------------------------------------


def save_csv(scen: ScenarioSet, path) -> None:
    S, T, D, H, _ = scen.demand_mult.shape
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        if scen.seed is not None:
            w.writerow(["", "meta", "seed", "", "", "", str(scen.seed)])
        if scen.spec_fingerprint:
            w.writerow(["", "meta", "spec_fingerprint", "", "", "", scen.spec_fingerprint])
        for s in range(S):
            w.writerow([s, "probability", "", "", "", "", _fmt(scen.prob[s])])
            for t in range(T):
                for j, name in enumerate(scen.hydro_names):
                    w.writerow([s, "inflow", name, t, "", "", _fmt(scen.inflow[s, t, j])])
            for j, name in enumerate(scen.renewable_names):
                for t in range(T):
                    for d in range(D):
                        for h in range(H):
                            w.writerow([s, "capacity_factor", name, t, d, h,
                                        _fmt(scen.capacity_factor[s, t, d, h, j])])
            for j, name in enumerate(scen.bus_names):
                for t in range(T):
                    for d in range(D):
                        for h in range(H):
                            w.writerow([s, "demand_multiplier", name, t, d, h,
                                        _fmt(scen.demand_mult[s, t, d, h, j])])


def _int(v, row, col):
    try:
        out = int(v)
    except ValueError:
        raise ScenarioFormatError(f"row {row}: column {col} must be an integer, got {v!r}") from None
    if out < 0:
        raise ScenarioFormatError(f"row {row}: column {col} must be nonnegative")
    return out


def load_csv(path) -> ScenarioSet:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ScenarioFormatError("row 1: empty file, expected header " + ",".join(CSV_HEADER))
    if [c.strip() for c in rows[0]] != CSV_HEADER:
        raise ScenarioFormatError(f"row 1: header must be {','.join(CSV_HEADER)}")
    meta = {}
    prob, inflow, cf, dem = {}, {}, {}, {}
    names = {"inflow": [], "capacity_factor": [], "demand_multiplier": []}
    for rn, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(CSV_HEADER):
            raise ScenarioFormatError(f"row {rn}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        scen, kind, entity, stage, day, hour, value = (c.strip() for c in row)
        if kind not in KINDS:
            raise ScenarioFormatError(f"row {rn}: unknown kind {kind!r}")
        if kind == "meta":
            meta[entity] = value
            continue
        s = _int(scen, rn, "scenario")
        try:
            v = float(value)
        except ValueError:
            raise ScenarioFormatError(f"row {rn}: value {value!r} is not a number") from None
        if not np.isfinite(v):
            raise ScenarioFormatError(f"row {rn}: value must be finite")
        if kind == "probability":
            key, target = s, prob
        else:
            if not entity:
                raise ScenarioFormatError(f"row {rn}: {kind} needs an entity")
            if entity not in names[kind]:
                names[kind].append(entity)
            t = _int(stage, rn, "stage")
            if kind == "inflow":
                key, target = (s, t, entity), inflow
            else:
                key = (s, t, _int(day, rn, "day"), _int(hour, rn, "hour"), entity)
                target = cf if kind == "capacity_factor" else dem
        if key in target:
            raise ScenarioFormatError(f"row {rn}: duplicate {kind} entry")
        target[key] = (v, rn)

    if not prob:
        raise ScenarioFormatError("no probability rows")
    S = max(prob) + 1
    if sorted(prob) != list(range(S)):
        raise ScenarioFormatError("scenario numbers must run 0..S-1 without gaps")
    if not dem:
        raise ScenarioFormatError("no demand_multiplier rows")
    T = 1 + max(k[1] for k in dem)
    D = 1 + max(k[2] for k in dem)
    H = 1 + max(k[3] for k in dem)
    hy, rn_, bs = names["inflow"], names["capacity_factor"], names["demand_multiplier"]

    def fill(target, shape, index, label):
        arr = np.full(shape, np.nan)
        for key, (v, rnum) in target.items():
            try:
                arr[index(key)] = v
            except IndexError:
                raise ScenarioFormatError(f"row {rnum}: {label} index outside the inferred dimensions") from None
        if np.isnan(arr).any():
            miss = np.argwhere(np.isnan(arr))[0]
            raise ScenarioFormatError(f"missing {label} entry at index {tuple(int(i) for i in miss)}")
        return arr

    p = np.array([prob[s][0] for s in range(S)])
    a = fill(inflow, (S, T, len(hy)), lambda k: (k[0], k[1], hy.index(k[2])), "inflow")
    c = fill(cf, (S, T, D, H, len(rn_)), lambda k: (k[0], k[1], k[2], k[3], rn_.index(k[4])), "capacity_factor")
    m = fill(dem, (S, T, D, H, len(bs)), lambda k: (k[0], k[1], k[2], k[3], bs.index(k[4])), "demand_multiplier")

    neg = np.flatnonzero(p < 0)
    if neg.size:
        raise ScenarioFormatError(f"row {prob[int(neg[0])][1]}: negative probability")
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise ScenarioFormatError(f"probabilities sum to {total:.12g}, expected 1")
    if np.ptp(p) <= 1e-12:
        p = np.full(S, 1.0 / S)
    else:
        p = p / total
    for label, target, lo, hi, strict in (
        ("inflow", inflow, 0.0, np.inf, False),
        ("capacity_factor", cf, 0.0, 1.0, False),
        ("demand_multiplier", dem, 0.0, np.inf, True),
    ):
        for key, (v, rnum) in target.items():
            if v < lo or v > hi or (strict and v <= lo):
                raise ScenarioFormatError(f"row {rnum}: {label} value {v:g} out of range")
    seed = meta.get("seed")
    return ScenarioSet(
        prob=p, inflow=a, capacity_factor=c, demand_mult=m,
        hydro_names=tuple(hy), renewable_names=tuple(rn_), bus_names=tuple(bs),
        seed=int(seed) if seed not in (None, "") else None,
        spec_fingerprint=meta.get("spec_fingerprint", ""),
    )
