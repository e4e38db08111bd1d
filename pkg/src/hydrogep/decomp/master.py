"""Master problems: Benders cuts, optional primal cuts and optional consensus terms.

Column layout of every master::

    [ x (n1) | alpha_w for every scenario | y_s for each embedded scenario s ]

followed, for penalised masters, by the epigraph columns of the quadratic.
Rows: embedded scenario blocks, the epigraph links ``alpha_s >= c'y_s``, any
first-stage rows, then one row per distinct pooled cut.  Cuts are appended, so
a basis of the previous iteration extends to the next one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from ..lp import (
    DEFAULT_CONFIG, GE, LpInstance, MilpInstance, SolverConfig,
    apply_separable_quadratic, remap_basis, solve_milp,
)
from ..model import CompactTwoStage
from .subproblem import CutPool


class MasterError(RuntimeError):
    pass


@dataclass(frozen=True)
class Penalty:
    """``w'(x - center) + sum_i weights_i/2 (x_i - center_i)^2`` over the first stage."""

    center: np.ndarray
    linear: np.ndarray
    weights: np.ndarray
    half_width: np.ndarray
    segments: int = 8

    @property
    def quadratic(self) -> bool:
        return bool((self.weights > 0).any())


@dataclass(frozen=True)
class MasterResult:
    objective: float  # value of the solved problem, penalty included
    bound: float  # proven lower bound on it
    x: np.ndarray
    alpha: np.ndarray
    nodes: int
    lp_iterations: int


class MasterProblem:
    def __init__(self, cm: CompactTwoStage, primal: Sequence[int] = (), config: SolverConfig = DEFAULT_CONFIG):
        self.cm = cm
        self.primal = tuple(int(s) for s in primal)
        self.config = config
        n1, S, n2 = cm.n1, cm.n_scenarios, cm.n2
        self.alpha0 = n1
        self.n_cols = n1 + S + n2 * len(self.primal)
        blocks, senses, rhs = [], [], []
        for k, s in enumerate(self.primal):
            off = n1 + S + k * n2
            mc, mf = cm.W.shape[0], cm.F.shape[0]
            blocks.append(sp.hstack([-cm.T[s], sp.csr_matrix((mc, S + k * n2)), cm.W,
                                     sp.csr_matrix((mc, self.n_cols - off - n2))]))
            senses.append(cm.coupling_senses)
            rhs.append(cm.h[s])
            blocks.append(sp.hstack([sp.csr_matrix((mf, off)), cm.F, sp.csr_matrix((mf, self.n_cols - off - n2))]))
            senses.append(cm.feas_senses)
            rhs.append(cm.f[s])
            link = sp.lil_matrix((1, self.n_cols))
            link[0, n1 + s] = 1.0
            link[0, off: off + n2] = -cm.second_cost
            blocks.append(link.tocsr())
            senses.append(np.array([GE]))
            rhs.append(np.zeros(1))
        A1, s1, b1 = cm.first_stage_rows()
        if A1.shape[0]:
            blocks.append(sp.hstack([A1, sp.csr_matrix((A1.shape[0], self.n_cols - n1))]))
            senses.append(s1)
            rhs.append(b1)
        self.base_A = sp.vstack(blocks, format="csr") if blocks else sp.csr_matrix((0, self.n_cols))
        self.base_senses = np.concatenate(senses) if senses else np.zeros(0, dtype="<U1")
        self.base_b = np.concatenate(rhs) if rhs else np.zeros(0)
        self.cost = np.concatenate([cm.first_cost, cm.prob, np.zeros(self.n_cols - n1 - S)])
        self.lb = np.concatenate([cm.first_lb, np.zeros(S), np.tile(cm.second_lb, len(self.primal))])
        self.ub = np.concatenate([cm.first_ub, np.full(S, np.inf), np.tile(cm.second_ub, len(self.primal))])
        self.binaries = cm.binaries
        self._cut_A = sp.csr_matrix((0, self.n_cols))
        self._cut_b = np.zeros(0)
        self._warm = {}  # tag -> (basis, n_cut_rows, n_cols, n_quad_rows)

    @property
    def m_base(self) -> int:
        return self.base_A.shape[0]

    def _sync(self, pool: CutPool):
        have = self._cut_A.shape[0]
        if pool.n_rows > have:
            A, b = pool.rows(self.alpha0, self.n_cols, start=have)
            self._cut_A = sp.vstack([self._cut_A, A], format="csr")
            self._cut_b = np.concatenate([self._cut_b, b])

    def instance(self, pool: CutPool, penalty: Optional[Penalty] = None) -> MilpInstance:
        self._sync(pool)
        A = sp.vstack([self.base_A, self._cut_A], format="csc")
        senses = np.concatenate([self.base_senses, np.full(self._cut_A.shape[0], GE)])
        b = np.concatenate([self.base_b, self._cut_b])
        cost = self.cost.copy()
        offset = 0.0
        if penalty is not None:
            cost[: self.cm.n1] += penalty.linear
            offset = -float(penalty.linear @ penalty.center)
        lp = LpInstance(c=cost, A=A, senses=senses, b=b, lb=self.lb, ub=self.ub, offset=offset)
        inst = MilpInstance(lp, self.binaries)
        if penalty is not None and penalty.quadratic:
            pad = self.n_cols - self.cm.n1
            inst = apply_separable_quadratic(
                inst,
                center=np.concatenate([penalty.center, np.zeros(pad)]),
                weights=np.concatenate([penalty.weights, np.zeros(pad)]),
                segments=penalty.segments,
                half_width=np.concatenate([penalty.half_width, np.ones(pad)]),
            )
        return inst

    def _warm_basis(self, tag, inst: MilpInstance):
        if tag not in self._warm:
            return None
        basis, n_cuts_old, n_old, q_rows_old = self._warm[tag]
        n_cuts = self._cut_A.shape[0]
        m_new, n_new = inst.lp.m, inst.lp.n
        q_rows = m_new - self.m_base - n_cuts
        if n_old > n_new or q_rows_old not in (0, q_rows):
            return None
        m_keep = self.m_base + n_cuts_old
        row_map = np.concatenate([np.arange(m_keep), self.m_base + n_cuts + np.arange(q_rows_old)])
        return remap_basis(basis, np.arange(n_old), row_map, n_new, m_new)

    def solve(self, pool: CutPool, penalty: Optional[Penalty] = None, warm: Optional[str] = "plain") -> MasterResult:
        """Solve the master over the current pool.

        ``warm`` names a private warm-start chain (None = cold start).
        """
        inst = self.instance(pool, penalty)
        basis = self._warm_basis(warm, inst) if warm is not None else None
        sol = solve_milp(inst, basis=basis, config=self.config)
        if sol.status != "optimal":
            raise MasterError(f"master {self.primal or 'tbd'} is {sol.status}")
        if warm is not None and sol.root_basis is not None:
            n_cuts = self._cut_A.shape[0]
            self._warm[warm] = (sol.root_basis, n_cuts, inst.lp.n, inst.lp.m - self.m_base - n_cuts)
        n1, S = self.cm.n1, self.cm.n_scenarios
        x = sol.x[:n1].copy()
        x[self.cm.binary] = np.round(x[self.cm.binary])
        x = np.clip(x, self.cm.first_lb, self.cm.first_ub)
        return MasterResult(float(sol.objective), float(sol.bound), x, sol.x[n1: n1 + S].copy(),
                            sol.nodes, sol.lp_iterations)
