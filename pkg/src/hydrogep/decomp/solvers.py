"""Benders variants: single master, multiple masters, and multiple masters with consensus.

All three share the cut pool, the bound bookkeeping and the parallel recourse
evaluator.  Per iteration the work is: masters (parallel), barrier, scenario
subproblems at every trial point (parallel), barrier, bookkeeping.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..lp import DEFAULT_CONFIG, SolverConfig, solve_milp
from ..model import CompactTwoStage, reassemble_de, split_de_solution
from .consensus import ConsensusState, consensus_point, ph_update
from .master import MasterProblem, MasterResult, Penalty
from .subproblem import Cut, CutPool, RecourseEvaluator, clean_cut

log = logging.getLogger(__name__)

CONVERGED, ITERATION_CAP, TIME_LIMIT = "converged", "iteration-cap", "time-limit"
UB_TIE = 1e-9


@dataclass(frozen=True)
class SolveOptions:
    eps: float = 1e-3  # relative gap
    max_iter: int = 200
    workers: int = 1
    rho: float = 1.0  # consensus weight of decision-rule coefficients
    inv_weight: float = 1.0  # multiple of the investment cost used as consensus weight
    segments: int = 8
    half_width_fraction: float = 0.25  # of each coefficient's bound range
    update_weights: bool = True
    zeta_cuts: bool = True  # also evaluate, cut at and keep as candidates the bound problems' minimisers
    masters: Optional[tuple] = None  # scenario subsets, default one master per scenario
    time_limit: Optional[float] = None
    record_time: bool = True
    config: SolverConfig = DEFAULT_CONFIG

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.rho < 0 or self.inv_weight < 0:
            raise ValueError("consensus weights must be nonnegative")


@dataclass
class IterationRecord:
    iteration: int
    seconds: float
    lb: float  # best lower bound so far
    ub: float  # upper bound of this iteration
    best_ub: float
    gap: float
    lb_raw: float  # lower bound produced by this iteration alone
    master_values: tuple = ()  # z_s (or zeta_s) per master


@dataclass
class SolveReport:
    method: str
    records: list = field(default_factory=list)
    x: Optional[np.ndarray] = None
    objective: float = float("inf")
    lb: float = -float("inf")
    gap: float = float("inf")
    termination: str = ""
    seconds: float = 0.0
    master_count: int = 1
    cuts: Optional[CutPool] = None
    consensus: list = field(default_factory=list)  # ConsensusState per iteration
    trial_points: list = field(default_factory=list)  # per iteration, (S, n1)

    @property
    def converged(self) -> bool:
        return self.termination == CONVERGED

    @property
    def iterations(self) -> int:
        return len(self.records)


def relative_gap(ub: float, lb: float) -> float:
    if not np.isfinite(ub):
        return float("inf")
    return max(0.0, (ub - lb) / max(1.0, abs(ub)))


class _Run:
    """Shared loop state of one decomposition run."""

    def __init__(self, cm: CompactTwoStage, method: str, opts: SolveOptions, n_masters: int):
        self.cm, self.opts = cm, opts
        self.report = SolveReport(method=method, master_count=n_masters)
        self.pool = CutPool(cm.n1, cm.n_scenarios)
        self.report.cuts = self.pool
        self.ev = RecourseEvaluator(cm, opts.workers, opts.config)
        self.t0 = time.perf_counter()
        self.best_lb = -np.inf

    def close(self):
        self.ev.close()

    def evaluate(self, points, k: int, sources: Sequence[int]):
        """Upper bounds at each trial point and new cuts for the pool."""
        results = self.ev.evaluate(points)
        ubs = []
        for x, src, res in zip(points, sources, results):
            ubs.append(float(self.cm.first_cost @ x) + self.ev.expected(res))
            for r in res:
                cut = Cut(r.scenario, src, k, r.objective, r.slope, r.x)
                self.pool.add(clean_cut(cut, self.cm.first_lb, self.cm.first_ub))
        return ubs

    def record(self, k: int, lb_raw: float, ubs, points, master_values=()) -> bool:
        rep = self.report
        # lowest index wins ties; replace the incumbent only on strict improvement
        j = int(np.argmin(ubs))
        if rep.x is None or ubs[j] < rep.objective - UB_TIE * max(1.0, abs(rep.objective)):
            rep.x, rep.objective = np.asarray(points[j]).copy(), float(ubs[j])
        self.best_lb = max(self.best_lb, lb_raw)
        rep.lb = self.best_lb
        rep.gap = relative_gap(rep.objective, self.best_lb)
        secs = time.perf_counter() - self.t0
        rep.records.append(IterationRecord(k, secs if self.opts.record_time else 0.0, self.best_lb,
                                           float(ubs[j]), rep.objective, rep.gap, float(lb_raw),
                                           tuple(float(v) for v in master_values)))
        rep.trial_points.append(np.asarray(points, float).copy())
        log.info("%s it %d lb %.6g ub %.6g gap %.3g%%", rep.method, k, self.best_lb, rep.objective, 100 * rep.gap)
        if rep.gap <= self.opts.eps:
            rep.termination = CONVERGED
            return True
        if self.opts.time_limit is not None and secs > self.opts.time_limit:
            rep.termination = TIME_LIMIT
            return True
        return False

    def finish(self) -> SolveReport:
        if not self.report.termination:
            self.report.termination = ITERATION_CAP
        self.report.seconds = time.perf_counter() - self.t0
        self.close()
        return self.report


def _master_sets(cm: CompactTwoStage, opts: SolveOptions):
    sets = opts.masters if opts.masters is not None else tuple((w,) for w in range(cm.n_scenarios))
    sets = tuple(tuple(int(w) for w in s) for s in sets)
    if not sets or any(not s for s in sets):
        raise ValueError("every master needs at least one scenario")
    for s in sets:
        for w in s:
            if not 0 <= w < cm.n_scenarios:
                raise ValueError(f"master scenario {w} out of range")
    p = np.array([cm.prob[list(s)].sum() for s in sets])
    return sets, p / p.sum()


def solve_tbd(cm: CompactTwoStage, opts: SolveOptions = SolveOptions()) -> SolveReport:
    """Multi-cut Benders with one master."""
    run = _Run(cm, "tbd", opts, 1)
    master = MasterProblem(cm, (), opts.config)
    try:
        for k in range(1, opts.max_iter + 1):
            m = master.solve(run.pool)
            ubs = run.evaluate([m.x], k, [-1])
            if run.record(k, m.bound, ubs, [m.x], (m.bound,)):
                break
    finally:
        run.close()
    return run.finish()


def _solve_masters(run: _Run, masters, jobs):
    """Run ``jobs[s](masters[s])`` for every master through the worker pool, in master order."""
    return run.ev.map(lambda s: jobs(s, masters[s]), range(len(masters)))


def solve_bdmm(cm: CompactTwoStage, opts: SolveOptions = SolveOptions()) -> SolveReport:
    """Benders with one master per scenario subset, each embedding its scenarios' operation."""
    sets, _ = _master_sets(cm, opts)
    run = _Run(cm, "bdmm", opts, len(sets))
    masters = [MasterProblem(cm, s, opts.config) for s in sets]
    try:
        for k in range(1, opts.max_iter + 1):
            res: list = _solve_masters(run, masters, lambda s, mp: mp.solve(run.pool))
            points = [r.x for r in res]
            z = [r.bound for r in res]
            ubs = run.evaluate(points, k, range(len(sets)))
            if run.record(k, max(z), ubs, points, z):
                break
    finally:
        run.close()
    return run.finish()


def consensus_weights(cm: CompactTwoStage, opts: SolveOptions) -> np.ndarray:
    """Per-component weights: investment cost on investments, rho on rule coefficients."""
    lay = cm.layout
    rho = np.zeros(cm.n1)
    rho[lay.inv] = opts.inv_weight * cm.first_cost[lay.inv]
    rho[lay.ldr0.start: lay.ldr.stop] = opts.rho
    free = cm.first_lb == cm.first_ub
    rho[free] = 0.0  # fixed entries never deviate
    return rho


def solve_abdmm(cm: CompactTwoStage, opts: SolveOptions = SolveOptions()) -> SolveReport:
    """Multiple masters pulled towards consensus by progressive-hedging terms.

    Iteration k solves, per master s, the penalised master (centre xbar^{k-1},
    multipliers w_s^k) for the trial point and the linearly penalised master for
    zeta_s; the lower bound is sum_s p_s zeta_s.  The first iteration has no
    consensus point yet and runs without penalty.

    With ``zeta_cuts`` the bound problems' minimisers are evaluated as well:
    their cuts tighten the models where the bound is decided, and they compete
    for the incumbent after the penalised trial points.
    """
    sets, p = _master_sets(cm, opts)
    S = len(sets)
    run = _Run(cm, "abdmm", opts, S)
    masters = [MasterProblem(cm, s, opts.config) for s in sets]
    rho = consensus_weights(cm, opts)
    half = opts.half_width_fraction * (cm.first_ub - cm.first_lb)
    half = np.where(half > 0, half, 1.0)
    state = ConsensusState.initial(S, rho)
    run.report.consensus.append(state)
    try:
        for k in range(1, opts.max_iter + 1):
            snap = state

            def job(s, mp: MasterProblem):
                if not snap.started:
                    r = mp.solve(run.pool)
                    return r, r
                pen = Penalty(center=snap.xbar, linear=snap.weights[s], weights=rho, half_width=half,
                              segments=opts.segments)
                r = mp.solve(run.pool, pen, warm="penalised")
                lin = Penalty(center=snap.xbar, linear=snap.weights[s], weights=np.zeros(cm.n1),
                              half_width=half, segments=opts.segments)
                z = mp.solve(run.pool, lin, warm=None)
                return r, z

            out = _solve_masters(run, masters, job)
            points = [r.x for r, _ in out]
            zetas = [z.bound for _, z in out]
            extra = [z.x for r, z in out if opts.zeta_cuts and z is not r]
            ubs = run.evaluate(points + extra, k, list(range(S)) + list(range(len(extra))))
            lb = 0.0
            for ps, z in zip(p, zetas):
                lb += ps * z
            if opts.update_weights:
                state = ph_update(state, points, p)
            else:
                state = ConsensusState(state.weights, consensus_point(points, p), state.rho, state.iteration + 1)
            run.report.consensus.append(state)
            if run.record(k, lb, ubs, points + extra, zetas):
                break
    finally:
        run.close()
    return run.finish()


def solve_de(cm: CompactTwoStage, opts: SolveOptions = SolveOptions()) -> SolveReport:
    """Deterministic equivalent through branch and bound, reported like a one-iteration run."""
    run = _Run(cm, "de", opts, 1)
    try:
        sol = solve_milp(reassemble_de(cm), config=opts.config)
        if sol.status != "optimal":
            raise RuntimeError(f"deterministic equivalent is {sol.status}")
        x, _ = split_de_solution(cm, sol.x)
        x[cm.binary] = np.round(x[cm.binary])
        x = np.clip(x, cm.first_lb, cm.first_ub)
        run.record(1, sol.bound, [sol.objective], [x], (sol.bound,))
        run.report.termination = CONVERGED if run.report.gap <= opts.eps else ITERATION_CAP
    finally:
        run.close()
    return run.finish()


METHODS = {"de": solve_de, "tbd": solve_tbd, "bdmm": solve_bdmm, "abdmm": solve_abdmm}


def solve(cm: CompactTwoStage, method: str, opts: SolveOptions = SolveOptions()) -> SolveReport:
    try:
        fn = METHODS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose one of {', '.join(METHODS)}") from None
    return fn(cm, opts)
