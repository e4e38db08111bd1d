"""Bounded-variable revised simplex.

Rows are turned into equalities with one slack per row (``a_i x + s_i = b_i``),
so slack bounds carry the row sense: ``<=`` gives ``s >= 0``, ``>=`` gives
``s <= 0`` and ``=`` fixes ``s = 0``.  The starting basis is either the slack
basis or a basis handed back from an earlier solve.  Phase 1 minimises the sum
of bound violations of the basic variables (composite method), so an infeasible
warm start needs no artificial columns.

The basis inverse is a sparse LU factor of the starting basis followed by a
product-form eta file; it is rebuilt every ``refactor_every`` pivots.

Rows and columns are equilibrated by powers of two (geometric-mean passes)
before solving, so the tolerances act on a problem whose nonzeros are of
order one.  Power-of-two factors keep the scaling itself exact.
"""

from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .model import (
    AT_LOWER, AT_UPPER, AT_ZERO, BASIC, DEFAULT_CONFIG, EQ, GE, INFEASIBLE, LE, OPTIMAL, UNBOUNDED,
    Basis, LpInstance, LpSolution, NumericalError, SolverConfig,
)

log = logging.getLogger(__name__)

SCALE_PASSES = 6


def equilibrate(A: sp.csc_matrix):
    """Row and column factors (powers of two) with ``diag(r) A diag(c)`` near unit magnitude."""
    m, n = A.shape
    r = np.ones(m)
    c = np.ones(n)
    if A.nnz == 0:
        return r, c
    coo = A.tocoo()
    absv = np.abs(coo.data)
    keep = absv > 0
    ri, ci, absv = coo.row[keep], coo.col[keep], absv[keep]
    logv = np.log2(absv)
    for _ in range(SCALE_PASSES):
        cur = logv + np.log2(r)[ri] + np.log2(c)[ci]
        hi = np.full(m, -np.inf)
        lo = np.full(m, np.inf)
        np.maximum.at(hi, ri, cur)
        np.minimum.at(lo, ri, cur)
        has = np.isfinite(hi)
        r[has] *= 2.0 ** (-(hi[has] + lo[has]) / 2)
        cur = logv + np.log2(r)[ri] + np.log2(c)[ci]
        hi = np.full(n, -np.inf)
        lo = np.full(n, np.inf)
        np.maximum.at(hi, ci, cur)
        np.minimum.at(lo, ci, cur)
        has = np.isfinite(hi)
        c[has] *= 2.0 ** (-(hi[has] + lo[has]) / 2)
    return 2.0 ** np.round(np.log2(r)), 2.0 ** np.round(np.log2(c))


class _Factor:
    def __init__(self, B: sp.csc_matrix):
        self.m = B.shape[0]
        self.lu = splu(B, permc_spec="COLAMD")
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        z = self.lu.solve(a)
        for r, d in self.etas:
            zr = z[r] / d[r]
            z -= d * zr
            z[r] = zr
        return z

    def btran(self, c: np.ndarray) -> np.ndarray:
        v = np.array(c, dtype=float)
        for r, d in reversed(self.etas):
            v[r] = (v[r] - (v @ d - v[r] * d[r])) / d[r]
        return self.lu.solve(v, trans="T")

    def update(self, r: int, alpha: np.ndarray):
        self.etas.append((r, alpha.copy()))


class RevisedSimplex:
    """One solve of one instance.  Not reentrant; build a new object per solve."""

    def __init__(self, inst: LpInstance, config: SolverConfig = DEFAULT_CONFIG):
        self.inst = inst
        self.cfg = config
        n, m = inst.n, inst.m
        self.n, self.m, self.N = n, m, n + m
        # x = cs * x_scaled, y = rs * y_scaled
        self.rs, self.cs = equilibrate(inst.A)
        As = sp.diags(self.rs) @ inst.A @ sp.diags(self.cs)
        self.M = sp.hstack([As, sp.identity(m, format="csc")], format="csc")
        self.MT = self.M.T.tocsr()
        cs_cost = inst.c * self.cs
        cscale = max(1.0, float(np.abs(cs_cost).max())) if n else 1.0
        self.cscale = cscale
        self.cost = np.concatenate([cs_cost / cscale, np.zeros(m)])
        slo = np.where(inst.senses == GE, -np.inf, 0.0)
        sup = np.where(inst.senses == LE, np.inf, 0.0)
        self.lo = np.concatenate([inst.lb / self.cs, slo])
        self.up = np.concatenate([inst.ub / self.cs, sup])
        self.b = inst.b * self.rs
        self.iterations = 0

    # -- basis handling -------------------------------------------------

    def _default_status(self, j: int) -> int:
        if np.isfinite(self.lo[j]):
            return AT_LOWER
        if np.isfinite(self.up[j]):
            return AT_UPPER
        return AT_ZERO

    def _slack_basis(self):
        self.head = np.arange(self.n, self.N)
        self.status = np.empty(self.N, dtype=np.int8)
        for j in range(self.n):
            self.status[j] = self._default_status(j)
        self.status[self.n:] = BASIC

    def _load_basis(self, basis: Basis) -> bool:
        head = np.asarray(basis.head, dtype=int)
        status = np.asarray(basis.status, dtype=np.int8)
        if head.size != self.m or status.size != self.N:
            return False
        if np.unique(head).size != self.m or (status[head] != BASIC).any():
            return False
        if np.count_nonzero(status == BASIC) != self.m:
            return False
        self.head = head.copy()
        self.status = status.copy()
        # a status may point at a bound that no longer exists
        for j in np.flatnonzero(status != BASIC):
            s = status[j]
            if s == AT_LOWER and not np.isfinite(self.lo[j]):
                self.status[j] = self._default_status(j)
            elif s == AT_UPPER and not np.isfinite(self.up[j]):
                self.status[j] = self._default_status(j)
            elif s == AT_ZERO and (np.isfinite(self.lo[j]) or np.isfinite(self.up[j])):
                self.status[j] = self._default_status(j)
        return True

    def _nonbasic_values(self):
        x = np.zeros(self.N)
        st = self.status
        lo_m = st == AT_LOWER
        up_m = st == AT_UPPER
        x[lo_m] = self.lo[lo_m]
        x[up_m] = self.up[up_m]
        self.x = x

    def _refactor(self) -> bool:
        B = self.M[:, self.head]
        try:
            self.factor = _Factor(sp.csc_matrix(B))
        except RuntimeError:
            return False
        self.updates = 0
        return True

    def _recompute_basics(self):
        xn = self.x.copy()
        xn[self.head] = 0.0
        rhs = self.b - self.M @ xn
        self.x[self.head] = self.factor.ftran(rhs)

    def _start(self, basis):
        if basis is not None and self._load_basis(basis):
            self._nonbasic_values()
            if self._refactor():
                self._recompute_basics()
                if np.all(np.isfinite(self.x[self.head])):
                    return
            log.debug("warm basis rejected; falling back to slack basis")
        self._slack_basis()
        self._nonbasic_values()
        if not self._refactor():  # pragma: no cover - identity never singular
            raise NumericalError("slack basis factorisation failed")
        self._recompute_basics()

    # -- main loop ------------------------------------------------------

    def solve(self, basis: Basis | None = None) -> LpSolution:
        if self.m == 0:
            return self._solve_no_rows()
        cfg = self.cfg
        self._start(basis)
        tol, opt_tol, ptol = cfg.feas_tol, cfg.opt_tol, cfg.pivot_tol
        max_iter = cfg.max_iter_factor * (self.N + 10)
        degenerate_run = 0
        bland = False
        bland_after = 2 * (self.m + self.n)
        verified = 0
        fixed = self.lo == self.up

        while True:
            if self.iterations > max_iter:
                raise NumericalError(f"simplex iteration limit {max_iter} reached")
            if self.updates >= cfg.refactor_every:
                if not self._refactor():
                    raise NumericalError("basis became singular")
                self._recompute_basics()

            head = self.head
            xb = self.x[head]
            lb_b, ub_b = self.lo[head], self.up[head]
            below = xb < lb_b - tol
            above = xb > ub_b + tol
            phase1 = bool(below.any() or above.any())
            if phase1:
                cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                cost = None
            else:
                cb = self.cost[head]
                cost = self.cost
            y = self.factor.btran(cb)
            d = -(self.MT @ y)
            if cost is not None:
                d += cost
            st = self.status
            elig = np.zeros(self.N, dtype=bool)
            elig |= (st == AT_LOWER) & (d < -opt_tol)
            elig |= (st == AT_UPPER) & (d > opt_tol)
            elig |= (st == AT_ZERO) & (np.abs(d) > opt_tol)
            elig &= ~fixed
            cand = np.flatnonzero(elig)

            if cand.size == 0:
                # confirm on a fresh factor before declaring anything
                if self.updates > 0 and verified < 3:
                    verified += 1
                    if not self._refactor():
                        raise NumericalError("basis became singular")
                    self._recompute_basics()
                    continue
                if phase1:
                    return LpSolution(status=INFEASIBLE, iterations=self.iterations,
                                      basis=self._basis())
                return self._finish()

            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if d[q] < 0 else -1.0
            col = self.M[:, q].toarray().ravel()
            alpha = self.factor.ftran(col)
            delta = -direction * alpha

            step, r, to_upper = self._ratio_test(xb, lb_b, ub_b, delta, q, bland, phase1)
            if step == np.inf:
                if phase1:
                    raise NumericalError("phase 1 ray without breakpoint")
                return LpSolution(status=UNBOUNDED, iterations=self.iterations,
                                  basis=self._basis())

            self.iterations += 1
            verified = 0
            if step <= 1e-12:
                degenerate_run += 1
                if degenerate_run > bland_after and not bland:
                    log.debug("engaging Bland's rule after %d degenerate pivots", degenerate_run)
                    bland = True
            else:
                degenerate_run = 0
                bland = False

            self.x[head] = xb + step * delta
            self.x[q] += direction * step
            if r is None:
                # bound flip of the entering column
                if direction > 0:
                    self.status[q] = AT_UPPER
                    self.x[q] = self.up[q]
                else:
                    self.status[q] = AT_LOWER
                    self.x[q] = self.lo[q]
                continue
            if abs(alpha[r]) < ptol:  # pragma: no cover - ratio test filters these
                raise NumericalError("pivot below tolerance")
            leave = head[r]
            if to_upper:
                self.status[leave] = AT_UPPER
                self.x[leave] = self.up[leave]
            else:
                self.status[leave] = AT_LOWER
                self.x[leave] = self.lo[leave]
            self.status[q] = BASIC
            self.head[r] = q
            self.factor.update(r, alpha)
            self.updates += 1

    def _ratio_test(self, xb, lb_b, ub_b, delta, q, bland, phase1):
        """Return (step, leaving position or None for a bound flip, leaves at upper)."""
        tol, ptol = self.cfg.feas_tol, self.cfg.pivot_tol
        m = xb.size
        exact = np.full(m, np.inf)
        relaxed = np.full(m, np.inf)
        to_upper = np.zeros(m, dtype=bool)

        dn = delta < -ptol
        upm = delta > ptol
        # moving down onto the lower bound from a feasible position
        sel = dn & (xb >= lb_b - tol) & np.isfinite(lb_b)
        exact[sel] = (xb[sel] - lb_b[sel]) / -delta[sel]
        relaxed[sel] = (xb[sel] - lb_b[sel] + tol) / -delta[sel]
        # moving down from above the upper bound: first breakpoint is the upper bound
        sel = dn & (xb > ub_b + tol)
        exact[sel] = (xb[sel] - ub_b[sel]) / -delta[sel]
        relaxed[sel] = exact[sel]
        to_upper[sel] = True
        # moving up onto the upper bound from a feasible position
        sel = upm & (xb <= ub_b + tol) & np.isfinite(ub_b)
        exact[sel] = (ub_b[sel] - xb[sel]) / delta[sel]
        relaxed[sel] = (ub_b[sel] - xb[sel] + tol) / delta[sel]
        to_upper[sel] = True
        # moving up from below the lower bound: first breakpoint is the lower bound
        sel = upm & (xb < lb_b - tol)
        exact[sel] = (lb_b[sel] - xb[sel]) / delta[sel]
        relaxed[sel] = exact[sel]
        to_upper[sel] = False

        flip = self.up[q] - self.lo[q]
        if not np.isfinite(flip):
            flip = np.inf
        finite = np.isfinite(exact)
        if not finite.any():
            return (flip, None, False) if flip < np.inf else (np.inf, None, False)

        if bland:
            tmin = exact[finite].min()
            ties = np.flatnonzero(finite & (exact <= tmin + 1e-12))
            r = int(ties[np.argmin(self.head[ties])])
        else:
            tmax = relaxed[finite].min()
            ok = np.flatnonzero(finite & (exact <= tmax))
            if ok.size == 0:
                ok = np.flatnonzero(finite & (exact <= exact[finite].min()))
            r = int(ok[np.argmax(np.abs(delta[ok]))])
        step = max(float(exact[r]), 0.0)
        if flip <= step:
            return flip, None, False
        return step, r, bool(to_upper[r])

    # -- results ----------------------------------------------------------

    def _basis(self) -> Basis:
        return Basis(head=self.head.copy(), status=self.status.copy())

    def _finish(self) -> LpSolution:
        inst = self.inst
        n = self.n
        y_scaled = self.factor.btran(self.cost[self.head])
        y = y_scaled * self.cscale * self.rs
        x = self.x[:n] * self.cs
        # nonbasic values sit exactly on their bounds
        nb = np.flatnonzero(self.status[:n] == AT_LOWER)
        x[nb] = inst.lb[nb]
        nb = np.flatnonzero(self.status[:n] == AT_UPPER)
        x[nb] = inst.ub[nb]
        rc = inst.c - inst.A.T @ y
        rc[self.head[self.head < n]] = 0.0
        return LpSolution(
            status=OPTIMAL,
            objective=inst.objective(x),
            x=x,
            duals=y,
            reduced_costs=rc,
            iterations=self.iterations,
            basis=self._basis(),
        )

    def _solve_no_rows(self) -> LpSolution:
        inst = self.inst
        x = np.zeros(self.n)
        for j in range(self.n):
            cj, l, u = inst.c[j], inst.lb[j], inst.ub[j]
            if cj > 0:
                if not np.isfinite(l):
                    return LpSolution(status=UNBOUNDED)
                x[j] = l
            elif cj < 0:
                if not np.isfinite(u):
                    return LpSolution(status=UNBOUNDED)
                x[j] = u
            else:
                x[j] = l if np.isfinite(l) else (u if np.isfinite(u) else 0.0)
        status = np.array([AT_LOWER if np.isfinite(inst.lb[j]) else
                           (AT_UPPER if np.isfinite(inst.ub[j]) else AT_ZERO)
                           for j in range(self.n)], dtype=np.int8)
        return LpSolution(status=OPTIMAL, objective=inst.objective(x), x=x,
                          duals=np.zeros(0), reduced_costs=inst.c.copy(),
                          basis=Basis(head=np.zeros(0, dtype=int), status=status))


def solve_lp(inst: LpInstance, basis: Basis | None = None,
             config: SolverConfig = DEFAULT_CONFIG) -> LpSolution:
    """Solve ``inst`` to optimality, reporting primal, duals and reduced costs.

    Duals follow the minimisation convention: ``<=`` rows get ``y <= 0`` and
    ``>=`` rows get ``y >= 0``, so ``y`` is the derivative of the optimal value
    with respect to ``b``.
    """
    inst.validate()
    sol = RevisedSimplex(inst, config).solve(basis)
    cfg = config
    for _ in range(CERTIFY_RETRIES):
        if sol.status != OPTIMAL or _certified(inst, sol):
            return sol
        # the scaled tolerances let a dual violation through; tighten and resume
        cfg = replace(cfg, opt_tol=cfg.opt_tol * 1e-2)
        log.debug("dual certificate failed; resuming with opt_tol %g", cfg.opt_tol)
        sol = RevisedSimplex(inst, cfg).solve(sol.basis)
    if sol.status == OPTIMAL and not _certified(inst, sol):
        raise NumericalError("optimality could not be certified within the duality-gap tolerance")
    return sol


CERTIFY_RETRIES = 3


def _certified(inst: LpInstance, sol: LpSolution) -> bool:
    gap = sol.objective - sol.certified_bound(inst)
    return gap <= 1e-6 * (1.0 + abs(sol.objective))
