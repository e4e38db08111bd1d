"""Assemble the expansion model as a deterministic equivalent or as a compact two-stage form.

Both builders share one per-scenario row generator.  Every row is tagged as
*coupling* (generation limits tied to investment, decision-rule rows) or
*feasibility* (everything that involves second-stage columns only).  Coupling
rows are kept in the two-stage shape ``W y - T x (sense) h``.

Second-stage columns per scenario:

* ``g``  hourly generation of every unit (MW)
* ``th`` bus angle (reference bus fixed at zero)
* ``def`` hourly unserved demand (MW), priced at the deficit cost
* per hydro and stage: ``u`` release dictated by the decision rule,
  ``turb`` turbined water, ``dev+``/``dev-`` departures of ``turb`` from the
  rule (penalised), ``spill``, ``over`` uncontrolled overflow leaving the
  cascade (penalised) and ``v`` end-of-stage storage (hm3)

Deficit, rule departures and overflow together make every first-stage point
in the box admit a feasible second stage, so no feasibility cuts are needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ..lp import EQ, GE, LE, LpInstance, MilpInstance
from ..scenario import ScenarioSet
from .system import SystemData, validate

COUPLING, FEASIBILITY = "coupling", "feasibility"


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class FirstStageLayout:
    """Index ranges inside the flat first-stage vector."""

    n_units: int
    n_hydro: int
    n_stages: int
    unit_names: tuple = ()
    hydro_names: tuple = ()

    @property
    def inv(self) -> slice:
        return slice(0, self.n_units)

    @property
    def ldr0(self) -> slice:
        s = self.n_units
        return slice(s, s + self.n_hydro * self.n_stages)

    @property
    def ldr(self) -> slice:
        s = self.ldr0.stop
        return slice(s, s + self.n_hydro * self.n_stages * self.n_hydro)

    @property
    def size(self) -> int:
        return self.ldr.stop

    def ldr0_index(self, h: int, t: int) -> int:
        return self.ldr0.start + t * self.n_hydro + h

    def ldr_index(self, h: int, t: int, j: int) -> int:
        return self.ldr.start + (t * self.n_hydro + h) * self.n_hydro + j

    def intercepts(self, x) -> np.ndarray:
        """(T, n_hydro) rule intercepts."""
        return np.asarray(x)[self.ldr0].reshape(self.n_stages, self.n_hydro)

    def slopes(self, x) -> np.ndarray:
        """(T, n_hydro, n_hydro) rule coefficients on the stage inflow vector."""
        return np.asarray(x)[self.ldr].reshape(self.n_stages, self.n_hydro, self.n_hydro)

    def rule_release(self, x, inflow_t: np.ndarray, t: int) -> np.ndarray:
        return self.intercepts(x)[t] + self.slopes(x)[t] @ inflow_t


@dataclass(frozen=True)
class CompactTwoStage:
    """``min I'x + sum_w p_w c'y_w`` s.t. ``W y_w - T_w x (sense) h_w``, ``F y_w (sense) f_w``."""

    first_cost: np.ndarray
    first_lb: np.ndarray
    first_ub: np.ndarray
    binary: np.ndarray  # bool mask over x
    layout: FirstStageLayout
    second_cost: np.ndarray
    second_lb: np.ndarray
    second_ub: np.ndarray
    second_keys: tuple
    W: sp.csr_matrix
    coupling_senses: np.ndarray
    T: tuple  # per scenario, csr (m_c, n1)
    h: np.ndarray  # (S, m_c)
    F: sp.csr_matrix
    feas_senses: np.ndarray
    f: np.ndarray  # (S, m_f)
    prob: np.ndarray
    coupling_tags: tuple
    feas_tags: tuple
    balance_rows: np.ndarray  # positions inside the feasibility block
    balance_index: np.ndarray  # (n_balance, 4): bus, stage, day, hour
    balance_weight: np.ndarray  # hour weight of each balance row
    anticipative: bool = False
    # optional extra first-stage rows A1 x (sense) b1; unused by the shipped models
    first_A: Optional[sp.csr_matrix] = None
    first_senses: Optional[np.ndarray] = None
    first_b: Optional[np.ndarray] = None
    system_fingerprint: str = ""
    scenario_fingerprint: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n1(self) -> int:
        return self.first_cost.size

    @property
    def n2(self) -> int:
        return self.second_cost.size

    @property
    def n_scenarios(self) -> int:
        return self.prob.size

    @property
    def binaries(self) -> np.ndarray:
        return np.flatnonzero(self.binary)

    def key_index(self) -> dict:
        return {k: i for i, k in enumerate(self.second_keys)}

    def first_stage_rows(self):
        if self.first_A is None:
            return sp.csr_matrix((0, self.n1)), np.zeros(0, dtype="<U1"), np.zeros(0)
        return self.first_A, self.first_senses, self.first_b


# -- row generation ---------------------------------------------------------------


class _Block:
    """Collects columns and rows of one scenario."""

    def __init__(self):
        self.keys, self.cost, self.lb, self.ub = [], [], [], []
        self.index = {}
        self.rows = []  # (kind, tag, ycoef dict, xcoef dict, sense, rhs)

    def var(self, key, cost=0.0, lb=0.0, ub=np.inf):
        self.index[key] = len(self.keys)
        self.keys.append(key)
        self.cost.append(cost)
        self.lb.append(lb)
        self.ub.append(ub)

    def row(self, kind, tag, y, x, sense, rhs):
        self.rows.append((kind, tag, y, x, sense, float(rhs)))


def _check_inputs(system: SystemData, scen: ScenarioSet):
    diags = validate(system)
    if diags:
        raise ModelError("invalid system: " + "; ".join(diags))
    if scen is None or scen.count == 0:
        raise ModelError("at least one scenario is required")
    T, D, H = system.n_stages, system.n_days, system.hours_per_day
    if scen.demand_mult.shape[1:4] != (T, D, H):
        raise ModelError(f"scenario time grid {scen.demand_mult.shape[1:4]} != system {(T, D, H)}")
    if scen.hydro_names != tuple(h.name for h in system.hydros):
        raise ModelError("scenario hydro names do not match the system")
    if scen.renewable_names != tuple(r.name for r in system.renewables):
        raise ModelError("scenario renewable names do not match the system")
    if scen.bus_names != tuple(system.buses):
        raise ModelError("scenario bus names do not match the system")


def first_stage(system: SystemData, anticipative: bool = False):
    """First-stage layout, cost, bounds and binary mask."""
    units = system.units
    NH, T = len(system.hydros), system.n_stages
    lay = FirstStageLayout(len(units), NH, T, tuple(u.name for u in units),
                           tuple(h.name for h in system.hydros))
    cost = np.zeros(lay.size)
    lb = np.zeros(lay.size)
    ub = np.zeros(lay.size)
    binary = np.zeros(lay.size, dtype=bool)
    for i, u in enumerate(units):
        cost[i] = u.invest_cost
        binary[i] = True
        lb[i] = 1.0 if u.existing else 0.0
        ub[i] = 1.0
    if not anticipative:
        for t in range(T):
            for h, hy in enumerate(system.hydros):
                k = lay.ldr0_index(h, t)
                lb[k], ub[k] = -hy.v_max, hy.v_max
                for j in range(NH):
                    k = lay.ldr_index(h, t, j)
                    lb[k], ub[k] = -system.ldr_slope_bound, system.ldr_slope_bound
    return lay, cost, lb, ub, binary


def _scenario_block(system: SystemData, scen: ScenarioSet, w: int, lay: FirstStageLayout,
                    anticipative: bool) -> _Block:
    blk = _Block()
    T, D, H = system.n_stages, system.n_days, system.hours_per_day
    units = system.units
    nth, nre = len(system.thermals), len(system.renewables)
    hydro_unit = {h: nth + nre + h for h in range(len(system.hydros))}
    ref_bus = 0
    dw = system.day_weights
    pen = system.effective_ldr_penalty

    # columns
    for t in range(T):
        for d in range(D):
            wgt = dw[t, d]
            for k in range(H):
                for i, u in enumerate(units):
                    c = u.cost * wgt if i < nth else 0.0
                    blk.var(("g", i, t, d, k), cost=c)
                for b in range(len(system.buses)):
                    if b == ref_bus:
                        blk.var(("th", b, t, d, k), lb=0.0, ub=0.0)
                    else:
                        blk.var(("th", b, t, d, k), lb=-np.inf, ub=np.inf)
                for b in range(len(system.buses)):
                    blk.var(("def", b, t, d, k), cost=system.deficit_cost * wgt)
    for t in range(T):
        for h, hy in enumerate(system.hydros):
            if not anticipative:
                blk.var(("u", h, t), lb=-np.inf, ub=np.inf)
                blk.var(("dev+", h, t), cost=pen)
                blk.var(("dev-", h, t), cost=pen)
            blk.var(("turb", h, t), ub=hy.max_turbine)
            blk.var(("spill", h, t), ub=hy.max_spill)
            blk.var(("over", h, t), cost=system.overflow_cost)
            blk.var(("v", h, t), lb=hy.v_min, ub=hy.v_max)
    ix = blk.index

    # coupling: generation limited by installed capacity (times capacity factor)
    for t in range(T):
        for d in range(D):
            for k in range(H):
                for i, u in enumerate(units):
                    cap = u.capacity
                    if nth <= i < nth + nre:
                        cap *= scen.capacity_factor[w, t, d, k, i - nth]
                    blk.row(COUPLING, ("genlim", i, t, d, k), {ix[("g", i, t, d, k)]: 1.0},
                            {i: -cap}, LE, 0.0)
    # coupling: decision rule  u - x0 - X a = 0
    if not anticipative:
        for t in range(T):
            a_t = scen.inflow[w, t]
            for h in range(len(system.hydros)):
                xc = {lay.ldr0_index(h, t): -1.0}
                for j in range(len(system.hydros)):
                    if a_t[j] != 0.0:
                        xc[lay.ldr_index(h, t, j)] = -a_t[j]
                blk.row(COUPLING, ("ldr", h, t), {ix[("u", h, t)]: 1.0}, xc, EQ, 0.0)

    # hydro rows
    for t in range(T):
        for h, hy in enumerate(system.hydros):
            if not anticipative:
                blk.row(FEASIBILITY, ("release", h, t),
                        {ix[("u", h, t)]: 1.0, ix[("turb", h, t)]: -1.0,
                         ix[("dev+", h, t)]: -1.0, ix[("dev-", h, t)]: 1.0}, {}, EQ, 0.0)
            # v_t - v_{t-1} + turb + spill + over - upstream(turb + spill) = a_t
            y = {ix[("v", h, t)]: 1.0, ix[("turb", h, t)]: 1.0,
                 ix[("spill", h, t)]: 1.0, ix[("over", h, t)]: 1.0}
            rhs = scen.inflow[w, t, h]
            if t == 0:
                rhs += hy.v0
            else:
                y[ix[("v", h, t - 1)]] = -1.0
            for up in hy.upstream:
                j = system.hydro_index(up)
                y[ix[("turb", j, t)]] = y.get(ix[("turb", j, t)], 0.0) - 1.0
                y[ix[("spill", j, t)]] = y.get(ix[("spill", j, t)], 0.0) - 1.0
            blk.row(FEASIBILITY, ("water", h, t), y, {}, EQ, rhs)
            # productivity * turb = energy produced over the stage
            y = {ix[("turb", h, t)]: hy.productivity}
            for d in range(D):
                for k in range(H):
                    y[ix[("g", hydro_unit[h], t, d, k)]] = -dw[t, d]
            blk.row(FEASIBILITY, ("energy", h, t), y, {}, EQ, 0.0)
    for h, hy in enumerate(system.hydros):
        blk.row(FEASIBILITY, ("cyclic", h), {ix[("v", h, T - 1)]: 1.0}, {}, GE, hy.v0)

    # network rows
    bidx = {b: i for i, b in enumerate(system.buses)}
    for t in range(T):
        for d in range(D):
            for k in range(H):
                rows = [dict() for _ in system.buses]
                for i, u in enumerate(units):
                    rows[bidx[u.bus]][ix[("g", i, t, d, k)]] = 1.0
                for b in range(len(system.buses)):
                    rows[b][ix[("def", b, t, d, k)]] = 1.0
                for ln in system.lines:
                    f, to = bidx[ln.from_bus], bidx[ln.to_bus]
                    thf, tht = ix[("th", f, t, d, k)], ix[("th", to, t, d, k)]
                    # flow f->t = B (th_f - th_t) leaves f and enters t
                    for bus, sgn in ((f, -1.0), (to, 1.0)):
                        r = rows[bus]
                        r[thf] = r.get(thf, 0.0) + sgn * ln.susceptance
                        r[tht] = r.get(tht, 0.0) - sgn * ln.susceptance
                for b in range(len(system.buses)):
                    dem = system.demand[t, d, k, b] * scen.demand_mult[w, t, d, k, b]
                    blk.row(FEASIBILITY, ("balance", b, t, d, k), rows[b], {}, EQ, dem)
                for li, ln in enumerate(system.lines):
                    if ln.limit is None or not np.isfinite(ln.limit):
                        continue
                    f, to = bidx[ln.from_bus], bidx[ln.to_bus]
                    y = {ix[("th", f, t, d, k)]: ln.susceptance, ix[("th", to, t, d, k)]: -ln.susceptance}
                    blk.row(FEASIBILITY, ("flow+", li, t, d, k), y, {}, LE, ln.limit)
                    blk.row(FEASIBILITY, ("flow-", li, t, d, k), dict(y), {}, GE, -ln.limit)
                for i, th in enumerate(system.thermals):
                    if k == 0 or th.ramp is None or th.ramp >= th.capacity:
                        continue
                    y = {ix[("g", i, t, d, k)]: 1.0, ix[("g", i, t, d, k - 1)]: -1.0}
                    blk.row(FEASIBILITY, ("ramp+", i, t, d, k), y, {}, LE, th.ramp)
                    blk.row(FEASIBILITY, ("ramp-", i, t, d, k), dict(y), {}, GE, -th.ramp)
    return blk


def _csr(entries, shape):
    ri, ci, v = entries
    return sp.csr_matrix((np.asarray(v, float), (np.asarray(ri, int), np.asarray(ci, int))), shape=shape)


# -- builders -------------------------------------------------------------------


def build_de(system: SystemData, scen: ScenarioSet, anticipative: bool = False) -> MilpInstance:
    """Deterministic equivalent written directly over all scenarios.

    Column order: first stage, then one second-stage block per scenario.
    """
    _check_inputs(system, scen)
    lay, c1, lb1, ub1, binary = first_stage(system, anticipative)
    n1 = lay.size
    cost, lb, ub, names = list(c1), list(lb1), list(ub1), [f"x{j}" for j in range(n1)]
    ri, ci, vals, senses, rhs, rnames = [], [], [], [], [], []
    r = 0
    for w in range(scen.count):
        blk = _scenario_block(system, scen, w, lay, anticipative)
        off = len(cost)
        p = scen.prob[w]
        cost.extend(p * np.asarray(blk.cost))
        lb.extend(blk.lb)
        ub.extend(blk.ub)
        names.extend(f"{'_'.join(map(str, k))}_s{w}" for k in blk.keys)
        for kind, tag, y, x, sense, b in blk.rows:
            for j, v in y.items():
                ri.append(r)
                ci.append(off + j)
                vals.append(v)
            for j, v in x.items():
                ri.append(r)
                ci.append(j)
                vals.append(v)
            senses.append(sense)
            rhs.append(b)
            rnames.append(f"{'_'.join(map(str, tag))}_s{w}")
            r += 1
    A = sp.csc_matrix((vals, (ri, ci)), shape=(r, len(cost)))
    lp = LpInstance(c=cost, A=A, senses=np.array(senses), b=rhs, lb=lb, ub=ub,
                    row_names=rnames, col_names=names)
    return MilpInstance(lp, np.flatnonzero(binary))


def compile_compact(system: SystemData, scen: ScenarioSet, anticipative: bool = False) -> CompactTwoStage:
    _check_inputs(system, scen)
    lay, c1, lb1, ub1, binary = first_stage(system, anticipative)
    n1 = lay.size
    Ts, hs, fs = [], [], []
    ref = None
    for w in range(scen.count):
        blk = _scenario_block(system, scen, w, lay, anticipative)
        cw, cf_ = ([], [], []), ([], [], [])
        tw = ([], [], [])
        h, f, csen, fsen, ctag, ftag = [], [], [], [], [], []
        for kind, tag, y, x, sense, b in blk.rows:
            if kind == COUPLING:
                r = len(h)
                for j, v in y.items():
                    cw[0].append(r)
                    cw[1].append(j)
                    cw[2].append(v)
                for j, v in x.items():
                    # W y + x-coef x (sense) b  <=>  W y - T x (sense) b  with T = -x-coef
                    tw[0].append(r)
                    tw[1].append(j)
                    tw[2].append(-v)
                h.append(b)
                csen.append(sense)
                ctag.append(tag)
            else:
                r = len(f)
                for j, v in y.items():
                    cf_[0].append(r)
                    cf_[1].append(j)
                    cf_[2].append(v)
                f.append(b)
                fsen.append(sense)
                ftag.append(tag)
        n2 = len(blk.keys)
        W = _csr(cw, (len(h), n2))
        F = _csr(cf_, (len(f), n2))
        if ref is None:
            ref = dict(W=W, F=F, keys=tuple(blk.keys), cost=np.asarray(blk.cost), lb=np.asarray(blk.lb),
                       ub=np.asarray(blk.ub), csen=np.array(csen), fsen=np.array(fsen),
                       ctag=tuple(ctag), ftag=tuple(ftag))
        elif (W != ref["W"]).nnz or (F != ref["F"]).nnz or tuple(blk.keys) != ref["keys"]:
            raise ModelError("second-stage structure differs between scenarios")
        Ts.append(_csr(tw, (len(h), n1)))
        hs.append(h)
        fs.append(f)

    ftag = ref["ftag"]
    bal = [i for i, tg in enumerate(ftag) if tg[0] == "balance"]
    bal_index = np.array([ftag[i][1:] for i in bal], dtype=int).reshape(-1, 4)
    bal_weight = np.array([system.day_weights[t, d] for (_, t, d, _) in bal_index]) if bal else np.zeros(0)
    return CompactTwoStage(
        first_cost=c1, first_lb=lb1, first_ub=ub1, binary=binary, layout=lay,
        second_cost=ref["cost"], second_lb=ref["lb"], second_ub=ref["ub"], second_keys=ref["keys"],
        W=ref["W"], coupling_senses=ref["csen"], T=tuple(Ts), h=np.asarray(hs, float),
        F=ref["F"], feas_senses=ref["fsen"], f=np.asarray(fs, float), prob=scen.prob.copy(),
        coupling_tags=ref["ctag"], feas_tags=ftag, balance_rows=np.asarray(bal, dtype=int),
        balance_index=bal_index, balance_weight=bal_weight, anticipative=anticipative,
        system_fingerprint=system.fingerprint(), scenario_fingerprint=scen.fingerprint(),
        meta={"demand": np.array([[system.demand[t, d, k, b] * scen.demand_mult[w, t, d, k, b]
                                   for (b, t, d, k) in bal_index] for w in range(scen.count)])
              if bal else np.zeros((scen.count, 0))},
    )


def reassemble_de(cm: CompactTwoStage) -> MilpInstance:
    """Stack the compact form back into one deterministic-equivalent instance."""
    S, n1, n2 = cm.n_scenarios, cm.n1, cm.n2
    A1, s1, b1 = cm.first_stage_rows()
    blocks_rows = [sp.hstack([A1, sp.csr_matrix((A1.shape[0], S * n2))])]
    senses = [s1]
    rhs = [b1]
    for w in range(S):
        left = [sp.csr_matrix((cm.W.shape[0], n2))] * w
        right = [sp.csr_matrix((cm.W.shape[0], n2))] * (S - w - 1)
        blocks_rows.append(sp.hstack([-cm.T[w], *left, cm.W, *right]))
        senses.append(cm.coupling_senses)
        rhs.append(cm.h[w])
        left = [sp.csr_matrix((cm.F.shape[0], n2))] * w
        right = [sp.csr_matrix((cm.F.shape[0], n2))] * (S - w - 1)
        blocks_rows.append(sp.hstack([sp.csr_matrix((cm.F.shape[0], n1)), *left, cm.F, *right]))
        senses.append(cm.feas_senses)
        rhs.append(cm.f[w])
    A = sp.vstack(blocks_rows, format="csc")
    c = np.concatenate([cm.first_cost, *[cm.prob[w] * cm.second_cost for w in range(S)]])
    lb = np.concatenate([cm.first_lb, np.tile(cm.second_lb, S)])
    ub = np.concatenate([cm.first_ub, np.tile(cm.second_ub, S)])
    lp = LpInstance(c=c, A=A, senses=np.concatenate(senses), b=np.concatenate(rhs), lb=lb, ub=ub)
    return MilpInstance(lp, cm.binaries)


def split_de_solution(cm: CompactTwoStage, x_full: np.ndarray):
    """(first-stage x, list of second-stage y per scenario) from a DE solution vector."""
    n1, n2 = cm.n1, cm.n2
    return x_full[:n1].copy(), [x_full[n1 + w * n2: n1 + (w + 1) * n2].copy() for w in range(cm.n_scenarios)]


def model_statistics(cm: CompactTwoStage) -> dict:
    S = cm.n_scenarios
    mc, mf = cm.W.shape[0], cm.F.shape[0]
    t_nnz = sum(T.nnz for T in cm.T)
    stats = {
        "scenarios": S,
        "first_stage": {"columns": cm.n1, "binaries": int(cm.binary.sum())},
        "coupling": {"rows_per_scenario": mc, "nnz_W": cm.W.nnz, "nnz_T_total": t_nnz},
        "feasibility": {"rows_per_scenario": mf, "nnz_F": cm.F.nnz},
        "second_stage": {"columns_per_scenario": cm.n2},
    }
    stats["deterministic_equivalent"] = {
        "rows": S * (mc + mf),
        "columns": cm.n1 + S * cm.n2,
        "nonzeros": S * (cm.W.nnz + cm.F.nnz) + t_nnz,
    }
    return stats


def format_statistics(stats: dict) -> str:
    de = stats["deterministic_equivalent"]
    lines = [
        f"scenarios                 {stats['scenarios']}",
        f"first-stage columns       {stats['first_stage']['columns']} ({stats['first_stage']['binaries']} binary)",
        f"coupling rows / scenario  {stats['coupling']['rows_per_scenario']}",
        f"feasibility rows / scen.  {stats['feasibility']['rows_per_scenario']}",
        f"second-stage cols / scen. {stats['second_stage']['columns_per_scenario']}",
        f"DE constraints            {de['rows']}",
        f"DE variables              {de['columns']}",
        f"DE nonzeros               {de['nonzeros']}",
    ]
    return "\n".join(lines) + "\n"
