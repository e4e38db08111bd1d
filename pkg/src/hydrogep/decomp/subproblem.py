"""Scenario subproblems q_w(x), their duals, and the shared cut pool."""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from ..lp import DEFAULT_CONFIG, LpInstance, LpSolution, SolverConfig, solve_lp
from ..model import CompactTwoStage


class RecourseError(RuntimeError):
    """A scenario LP did not reach optimality (impossible under complete recourse)."""


@dataclass(frozen=True)
class SubproblemResult:
    scenario: int
    objective: float
    pi: np.ndarray  # coupling-row duals
    slope: np.ndarray  # T_w' pi, a subgradient of q_w at x
    x: np.ndarray
    balance_duals: np.ndarray
    y: Optional[np.ndarray] = None
    iterations: int = 0


@dataclass(frozen=True)
class Cut:
    """``alpha_w >= intercept + slope . (x - x_hat)``."""

    scenario: int
    source: int  # master that produced x_hat (-1 for the single TBD master)
    iteration: int
    intercept: float
    slope: np.ndarray
    x_hat: np.ndarray

    def value(self, x) -> float:
        return float(self.intercept + self.slope @ (np.asarray(x, float) - self.x_hat))

    @property
    def constant(self) -> float:
        """Right-hand side after moving ``slope . x_hat`` across."""
        return float(self.intercept - self.slope @ self.x_hat)


CLEAN_TOL = 1e-9


def clean_cut(cut: Cut, lb: np.ndarray, ub: np.ndarray, tol: float = CLEAN_TOL) -> Cut:
    """Drop slope entries whose effect over the box is below ``tol * max(1, |q|)``.

    The intercept is lowered by the largest change the dropped terms could make
    anywhere in ``[lb, ub]``, so the cleaned cut stays valid.  Noise-level entries
    otherwise put coefficients fifteen orders of magnitude apart in one row.
    """
    span = np.maximum(cut.x_hat - lb, ub - cut.x_hat)
    effect = np.abs(cut.slope) * span
    drop = (effect <= tol * max(1.0, abs(cut.intercept))) & (cut.slope != 0)
    if not drop.any():
        return cut
    slope = cut.slope.copy()
    slope[drop] = 0.0
    return Cut(cut.scenario, cut.source, cut.iteration, cut.intercept - float(effect[drop].sum()),
               slope, cut.x_hat)


class CutPool:
    """Append-only cut storage.

    Every cut is recorded; the master rows are the distinct ones, since exact
    duplicates (same scenario, same affine function) only enlarge the LP.
    """

    def __init__(self, n1: int, n_scenarios: int):
        self.n1 = n1
        self.n_scenarios = n_scenarios
        self.cuts: list = []
        self._rows: list = []  # index into cuts of distinct cuts
        self._seen: set = set()

    def __len__(self) -> int:
        return len(self.cuts)

    @property
    def n_rows(self) -> int:
        return len(self._rows)

    def add(self, cut: Cut) -> bool:
        self.cuts.append(cut)
        key = (cut.scenario, cut.constant, cut.slope.tobytes())
        if key in self._seen:
            return False
        self._seen.add(key)
        self._rows.append(len(self.cuts) - 1)
        return True

    def row_cuts(self, upto: Optional[int] = None) -> list:
        idx = self._rows if upto is None else self._rows[:upto]
        return [self.cuts[i] for i in idx]

    def rows(self, alpha_offset: int, n_cols: int, start: int = 0, stop: Optional[int] = None):
        """Cut rows ``alpha_w - slope.x >= constant`` as (csr, rhs) over ``n_cols`` columns."""
        sel = self._rows[start:stop]
        if not sel:
            return sp.csr_matrix((0, n_cols)), np.zeros(0)
        ri, ci, v, rhs = [], [], [], []
        for r, i in enumerate(sel):
            c = self.cuts[i]
            nz = np.flatnonzero(c.slope)
            ri.extend([r] * (nz.size + 1))
            ci.extend(nz.tolist())
            ci.append(alpha_offset + c.scenario)
            v.extend((-c.slope[nz]).tolist())
            v.append(1.0)
            rhs.append(c.constant)
        A = sp.csr_matrix((v, (ri, ci)), shape=(len(sel), n_cols))
        return A, np.asarray(rhs)


class ScenarioLp:
    """The operational LP of one scenario with a warm-start basis chain.

    Rows: coupling block ``W y (sense) h + T x`` followed by the feasibility
    block ``F y (sense) f``.  The basis chain is private to the scenario, so
    results do not depend on which worker thread runs it.
    """

    def __init__(self, cm: CompactTwoStage, w: int, config: SolverConfig = DEFAULT_CONFIG):
        self.cm, self.w, self.config = cm, w, config
        A = sp.vstack([cm.W, cm.F], format="csc")
        senses = np.concatenate([cm.coupling_senses, cm.feas_senses])
        self.m_c = cm.W.shape[0]
        self.base = LpInstance(c=cm.second_cost, A=A, senses=senses,
                               b=np.concatenate([cm.h[w], cm.f[w]]), lb=cm.second_lb, ub=cm.second_ub)
        self.basis = None
        self.lock = threading.Lock()

    def instance(self, x) -> LpInstance:
        b = self.base.b.copy()
        b[: self.m_c] = self.cm.h[self.w] + self.cm.T[self.w] @ np.asarray(x, float)
        return self.base.with_rhs(b)

    def solve(self, x, keep_y: bool = False, warm: bool = True) -> SubproblemResult:
        with self.lock:
            sol = solve_lp(self.instance(x), basis=self.basis if warm else None, config=self.config)
            if not sol.optimal:
                raise RecourseError(f"scenario {self.w}: subproblem {sol.status}")
            if warm:
                self.basis = sol.basis
        return self._result(x, sol, keep_y)

    def _result(self, x, sol: LpSolution, keep_y: bool) -> SubproblemResult:
        pi = sol.duals[: self.m_c].copy()
        slope = np.asarray(self.cm.T[self.w].T @ pi).ravel()
        bal = sol.duals[self.m_c + self.cm.balance_rows].copy()
        return SubproblemResult(self.w, float(sol.objective), pi, slope, np.asarray(x, float).copy(), bal,
                                sol.x.copy() if keep_y else None, sol.iterations)


def evaluate_subproblem(cm: CompactTwoStage, x, w: int, config: SolverConfig = DEFAULT_CONFIG,
                        keep_y: bool = False) -> SubproblemResult:
    """q_w(x) with duals, solved from scratch."""
    _check_first_stage(cm, x)
    return ScenarioLp(cm, w, config).solve(x, keep_y=keep_y, warm=False)


def _check_first_stage(cm: CompactTwoStage, x, tol: float = 1e-6):
    x = np.asarray(x, float)
    if x.shape != (cm.n1,):
        raise ValueError(f"first-stage vector has shape {x.shape}, expected ({cm.n1},)")
    if (x < cm.first_lb - tol).any() or (x > cm.first_ub + tol).any():
        raise ValueError("first-stage vector violates its bounds")
    xb = x[cm.binary]
    if (np.abs(xb - np.round(xb)) > tol).any():
        raise ValueError("investment entries must be 0 or 1")


class RecourseEvaluator:
    """Parallel evaluation of all scenario subproblems at one or more trial points.

    Each scenario keeps its own warm-start chain and is handled by one task that
    walks the trial points in order; sums are then formed in scenario order, so
    results are identical for any worker count.
    """

    def __init__(self, cm: CompactTwoStage, workers: int = 1, config: SolverConfig = DEFAULT_CONFIG):
        self.cm = cm
        self.workers = max(1, int(workers))
        self.lps = [ScenarioLp(cm, w, config) for w in range(cm.n_scenarios)]
        self._pool = ThreadPoolExecutor(self.workers) if self.workers > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def map(self, fn, items: Sequence):
        if self._pool is None:
            return [fn(i) for i in items]
        return list(self._pool.map(fn, items))

    def evaluate(self, points: Sequence, keep_y: bool = False) -> list:
        """results[k][w] for trial point k and scenario w."""
        points = [np.asarray(x, float) for x in points]

        def run(w):
            lp = self.lps[w]
            return [lp.solve(x, keep_y=keep_y) for x in points]

        per_scen = self.map(run, range(self.cm.n_scenarios))
        return [[per_scen[w][k] for w in range(self.cm.n_scenarios)] for k in range(len(points))]

    def expected(self, results: Sequence) -> float:
        total = 0.0
        for w, r in enumerate(results):
            total += self.cm.prob[w] * r.objective
        return total


def recourse(cm: CompactTwoStage, x, workers: int = 1, config: SolverConfig = DEFAULT_CONFIG) -> float:
    """Q(x) = sum_w p_w q_w(x)."""
    _check_first_stage(cm, x)
    with RecourseEvaluator(cm, workers, config) as ev:
        res = ev.evaluate([x])[0]
        return ev.expected(res)
