"""Out-of-sample evaluation of first-stage plans and the anticipative comparison.

Spot prices are balance-row duals of each scenario's own LP divided by the
hour weight of the row, so they are in $/MWh and independent of scenario
probabilities.  A stage price is the energy-weighted mean of its hourly prices
over all buses.  Quantiles use the nearest-rank rule on the probability
weighted sample.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .decomp import RecourseEvaluator, SolveOptions, solve
from .decomp.subproblem import ScenarioLp, _check_first_stage
from .lp import solve_lp
from .model import CompactTwoStage, SystemData, compile_compact, reassemble_de, split_de_solution
from .scenario import ScenarioSet

log = logging.getLogger(__name__)

PRICE_FLOOR = 0.01  # $/MWh, stages below this are skipped in the variability ratio
DEFICIT_TOL = 1e-6  # MWh
CHUNK = 16  # scenarios per warm-start chain
METRICS_SCHEMA = "gep-metrics/1"
QUANTILES_SCHEMA = "gep-price-quantiles/1"


@dataclass(frozen=True)
class OperationReport:
    scenario: int
    cost: float  # q_w(x)
    prices: np.ndarray  # $/MWh per balance row
    stage_prices: np.ndarray  # (T,) energy-weighted
    deficit: float  # MWh
    rule_violation: float  # hm3 of release the rule asked for but the bounds refused


@dataclass
class Simulation:
    x: np.ndarray
    prob: np.ndarray
    reports: list
    investment: float

    @property
    def recourse(self) -> float:
        total = 0.0
        for p, r in zip(self.prob, self.reports):
            total += p * r.cost
        return total

    @property
    def total(self) -> float:
        return self.investment + self.recourse

    @property
    def stage_prices(self) -> np.ndarray:
        return np.array([r.stage_prices for r in self.reports])


@dataclass(frozen=True)
class PolicyMetrics:
    expected_total_cost: float
    in_sample_total_cost: float
    regret: float
    average_spot_price: float
    p95_spot_price: float
    uncertainty_level: float
    time_variability: float  # fraction, shown as percent
    deficit_probability: float
    variability_skips: int = 0
    vnap: Optional[float] = None


@dataclass
class Comparison:
    nonanticipative: PolicyMetrics
    anticipative: PolicyMetrics
    vnap: float
    x_nonanticipative: np.ndarray
    x_anticipative: np.ndarray  # investments of the relaxation with a refitted rule
    in_sample_anticipative: float
    in_sample_refit: float
    simulations: dict = field(default_factory=dict)


def nearest_rank(values, prob, alpha: float) -> float:
    """Smallest v with P(X <= v) >= alpha."""
    values = np.asarray(values, float)
    prob = np.asarray(prob, float)
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(prob[order])
    k = int(np.searchsorted(cum, alpha * cum[-1] - 1e-12, side="left"))
    return float(values[order][min(k, values.size - 1)])


def _stage_prices(cm: CompactTwoStage, prices: np.ndarray, demand: np.ndarray) -> np.ndarray:
    stages = cm.balance_index[:, 1]
    T = int(stages.max()) + 1 if stages.size else 0
    energy = demand * cm.balance_weight
    out = np.zeros(T)
    for t in range(T):
        sel = stages == t
        e = energy[sel]
        out[t] = float(e @ prices[sel] / e.sum()) if e.sum() > 0 else float(prices[sel].mean())
    return out


def simulate(system: SystemData, x, oos: ScenarioSet, workers: int = 1,
             cm: Optional[CompactTwoStage] = None) -> Simulation:
    """Operate the plan ``x`` on every scenario of ``oos`` (rule applied to the new inflows)."""
    cm = compile_compact(system, oos) if cm is None else cm
    x = np.asarray(x, float)
    _check_first_stage(cm, x)
    keys = cm.key_index()
    deficits = np.array([keys[k] for k in cm.second_keys if k[0] == "def"], dtype=int)
    def_w = np.array([system.day_weights[k[2], k[3]] for k in cm.second_keys if k[0] == "def"])
    devs = np.array([keys[k] for k in cm.second_keys if k[0] in ("dev+", "dev-")], dtype=int)
    lps = [ScenarioLp(cm, w) for w in range(cm.n_scenarios)]

    def run(start):
        # warm starts chain inside a chunk only, so results do not depend on the worker count
        out, basis = [], None
        for lp in lps[start: start + CHUNK]:
            lp.basis = basis
            out.append(lp.solve(x, keep_y=True))
            basis = lp.basis
        return out

    with RecourseEvaluator(cm, workers) as ev:
        res = [r for chunk in ev.map(run, range(0, cm.n_scenarios, CHUNK)) for r in chunk]
    reports = []
    for r in res:
        prices = r.balance_duals / cm.balance_weight
        y = r.y
        dev = float(y[devs].sum()) if devs.size else 0.0
        if dev > 1e-6:
            log.info("scenario %d: rule release off by %.4g hm3 in total", r.scenario, dev)
        reports.append(OperationReport(r.scenario, r.objective, prices,
                                       _stage_prices(cm, prices, cm.meta["demand"][r.scenario]),
                                       float(def_w @ y[deficits]) if deficits.size else 0.0, dev))
    return Simulation(x, cm.prob.copy(), reports, float(cm.first_cost @ x))


def refit_ldr(cm: CompactTwoStage, x_inv) -> tuple:
    """Best decision rule for fixed investments: (full first-stage vector, objective)."""
    x_inv = np.asarray(x_inv, float)
    inv = cm.layout.inv
    if x_inv.shape != (inv.stop - inv.start,):
        raise ValueError(f"expected {inv.stop - inv.start} investment entries, got {x_inv.shape}")
    if (np.abs(x_inv - np.round(x_inv)) > 1e-9).any():
        raise ValueError("investments must be 0 or 1")
    x_inv = np.round(x_inv)
    if (x_inv < cm.first_lb[inv]).any() or (x_inv > cm.first_ub[inv]).any():
        raise ValueError("investments violate their bounds (existing units must stay built)")
    de = reassemble_de(cm).lp
    lb, ub = de.lb.copy(), de.ub.copy()
    lb[inv] = ub[inv] = x_inv
    sol = solve_lp(de.with_bounds(lb, ub))
    if not sol.optimal:
        raise RuntimeError(f"decision-rule refit is {sol.status}")
    x, _ = split_de_solution(cm, sol.x)
    x[inv] = x_inv
    return np.clip(x, cm.first_lb, cm.first_ub), float(sol.objective)


def policy_metrics(sim: Simulation, in_sample_total: float) -> PolicyMetrics:
    P = sim.stage_prices  # (S, T)
    prob = sim.prob
    S, T = P.shape
    avg = float(prob @ P.mean(axis=1))
    pooled_p = np.repeat(prob / T, T)
    p95 = nearest_rank(P.ravel(), pooled_p, 0.95)
    unc = float(np.mean([nearest_rank(P[:, t], prob, 0.95) - nearest_rank(P[:, t], prob, 0.05)
                         for t in range(T)]))
    var, skips = 0.0, 0
    if T > 1:
        for w in range(S):
            acc = 0.0
            for t in range(1, T):
                if abs(P[w, t - 1]) < PRICE_FLOOR:
                    skips += 1
                    continue
                acc += abs((P[w, t] - P[w, t - 1]) / P[w, t - 1])
            var += prob[w] * acc
        var /= T - 1
    deficit = float(sum(p for p, r in zip(prob, sim.reports) if r.deficit > DEFICIT_TOL))
    total = float(sim.total)
    return PolicyMetrics(total, float(in_sample_total), total - float(in_sample_total), avg, p95, unc,
                         float(var), deficit, skips)


def _overlap(a: ScenarioSet, b: ScenarioSet) -> bool:
    rows = set()
    for w in range(a.count):
        rows.add(a.inflow[w].tobytes() + a.capacity_factor[w].tobytes() + a.demand_mult[w].tobytes())
    return any(b.inflow[w].tobytes() + b.capacity_factor[w].tobytes() + b.demand_mult[w].tobytes() in rows
               for w in range(b.count))


def compare_policies(system: SystemData, scen_in: ScenarioSet, scen_oos: ScenarioSet, method: str = "de",
                     opts: SolveOptions = SolveOptions(), allow_overlap: bool = False) -> Comparison:
    """Nonanticipative plan vs the plan of the relaxation without the decision rule.

    Each plan's investments get the best rule for them (refit) before both
    plans are operated on the unseen scenarios.
    """
    if not allow_overlap and _overlap(scen_in, scen_oos):
        raise ValueError("in-sample and out-of-sample scenario sets share a scenario")
    cm = compile_compact(system, scen_in)
    cm_a = compile_compact(system, scen_in, anticipative=True)
    rep = solve(cm, method, opts)
    rep_a = solve(cm_a, method, opts)
    if rep.x is None or rep_a.x is None:
        raise RuntimeError("a policy solve returned no plan")
    # both rules come from the same refit LP, so equal investments give equal plans
    # even when the rule optimum is not unique
    x_n, _ = refit_ldr(cm, rep.x[cm.layout.inv])
    x_a, refit_obj = refit_ldr(cm, rep_a.x[cm.layout.inv])
    cm_oos = compile_compact(system, scen_oos)
    sim = simulate(system, x_n, scen_oos, opts.workers, cm_oos)
    sim_a = simulate(system, x_a, scen_oos, opts.workers, cm_oos)
    vnap = float(sim_a.total - sim.total)
    m = policy_metrics(sim, rep.objective)
    m_a = policy_metrics(sim_a, rep_a.objective)
    m, m_a = (PolicyMetrics(**{**asdict(v), "vnap": vnap}) for v in (m, m_a))
    return Comparison(m, m_a, vnap, x_n, x_a, rep_a.objective, refit_obj,
                      {"nonanticipative": sim, "anticipative": sim_a})


def candidate_values(system: SystemData, scen: ScenarioSet) -> np.ndarray:
    """Operating saving of each candidate built alone, next to the existing units only.

    Each value is ``F(existing) - F(existing + c)`` with the investment cost left
    out and the decision rule refitted, so it is what the nonanticipative model
    would pay at most for that unit.
    """
    cm = compile_compact(system, scen)
    inv = cm.layout.inv
    base = cm.first_lb[inv].copy()
    cost = cm.first_cost[inv]

    def operating(x_inv):
        _, obj = refit_ldr(cm, x_inv)
        return obj - float(cost @ x_inv)

    f0 = operating(base)
    out = np.zeros(base.size)
    for j in np.flatnonzero(cm.first_ub[inv] > base):
        x = base.copy()
        x[j] = 1.0
        out[j] = f0 - operating(x)
    return out


def price_candidates(system: SystemData, scen: ScenarioSet, factors) -> SystemData:
    """Copy of ``system`` with candidate ``j`` costing ``factors[j]`` times its value."""
    vals = candidate_values(system, scen)
    names = [u.name for u in system.units]
    price = {n: float(np.round(max(v, 0.0) * f, -3)) for n, v, f in zip(names, vals, factors)}

    def repriced(units):
        return tuple(u if u.existing else replace(u, invest_cost=price[u.name]) for u in units)

    return system.with_units(thermals=repriced(system.thermals), renewables=repriced(system.renewables),
                             hydros=repriced(system.hydros))


# -- artifacts ---------------------------------------------------------------------


def write_metrics(path, metrics: dict, header: Optional[dict] = None) -> None:
    doc = {"schema": METRICS_SCHEMA, **(header or {}),
           "policies": {name: asdict(m) for name, m in metrics.items()}}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_quantiles(path, sims: dict, header: Optional[dict] = None) -> None:
    """stage, policy, q05, q50, q95 of the stage spot price."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema={QUANTILES_SCHEMA}")
        for k, v in (header or {}).items():
            fh.write(f" {k}={v}")
        fh.write("\n")
        w = csv.writer(fh)
        w.writerow(["stage", "policy", "q05", "q50", "q95"])
        for name, sim in sims.items():
            P = sim.stage_prices
            for t in range(P.shape[1]):
                w.writerow([t + 1, name] + [f"{nearest_rank(P[:, t], sim.prob, a):.10g}" for a in (0.05, 0.5, 0.95)])
