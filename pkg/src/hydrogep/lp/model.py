"""Containers for linear and mixed-binary programs and their solutions."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = "L", "E", "G"
_SENSES = frozenset((LE, EQ, GE))

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LpError(Exception):
    pass


class DimensionError(LpError, ValueError):
    pass


class NumericalError(LpError, RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    feas_tol: float = 1e-7
    opt_tol: float = 1e-9
    pivot_tol: float = 1e-9
    refactor_every: int = 64
    max_iter_factor: int = 50


DEFAULT_CONFIG = SolverConfig()


@dataclass
class LpInstance:
    """min c'x + offset  s.t.  A x (senses) b,  lb <= x <= ub.

    ``A`` is kept as CSC; infinite bounds are ``-np.inf``/``np.inf``.
    """

    c: np.ndarray
    A: sp.csc_matrix
    senses: np.ndarray
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    offset: float = 0.0
    row_names: Optional[list] = None
    col_names: Optional[list] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.lb = np.asarray(self.lb, dtype=float).ravel()
        self.ub = np.asarray(self.ub, dtype=float).ravel()
        self.senses = np.asarray(self.senses, dtype="<U1").ravel()
        if not sp.issparse(self.A):
            self.A = sp.csc_matrix(np.atleast_2d(np.asarray(self.A, dtype=float)))
        else:
            self.A = sp.csc_matrix(self.A, dtype=float)
        if self.A.shape == (1, 0) and self.b.size == 0:
            self.A = sp.csc_matrix((0, self.c.size))
        self.validate()

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m(self) -> int:
        return self.b.size

    def validate(self):
        m, n = self.A.shape
        if n != self.c.size:
            raise DimensionError(f"A has {n} columns but c has {self.c.size} entries")
        if m != self.b.size:
            raise DimensionError(f"A has {m} rows but b has {self.b.size} entries")
        if self.senses.size != m:
            raise DimensionError(f"{self.senses.size} row senses for {m} rows")
        if self.lb.size != n or self.ub.size != n:
            raise DimensionError("bound vectors must match the number of columns")
        if self.row_names is not None and len(self.row_names) != m:
            raise DimensionError("row_names length mismatch")
        if self.col_names is not None and len(self.col_names) != n:
            raise DimensionError("col_names length mismatch")
        bad = set(self.senses.tolist()) - _SENSES
        if bad:
            raise ValueError(f"unknown row senses {sorted(bad)}")
        if np.isnan(self.c).any() or np.isnan(self.b).any() or np.isnan(self.A.data).any():
            raise ValueError("NaN coefficient in instance")
        if np.isinf(self.c).any() or np.isinf(self.b).any() or np.isinf(self.A.data).any():
            raise ValueError("infinite coefficient in instance")
        if np.isnan(self.lb).any() or np.isnan(self.ub).any():
            raise ValueError("NaN bound in instance")
        if (self.lb > self.ub).any():
            j = int(np.flatnonzero(self.lb > self.ub)[0])
            raise ValueError(f"lower bound exceeds upper bound on column {j}")
        if np.isposinf(self.lb).any() or np.isneginf(self.ub).any():
            raise ValueError("bounds must not exclude every finite value")

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.offset

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x

    def primal_residual(self, x: np.ndarray) -> float:
        """Largest violation of rows and bounds at ``x``."""
        act = self.row_activity(x)
        viol = np.zeros(self.m)
        le = self.senses == LE
        ge = self.senses == GE
        eq = self.senses == EQ
        viol[le] = np.maximum(act[le] - self.b[le], 0.0)
        viol[ge] = np.maximum(self.b[ge] - act[ge], 0.0)
        viol[eq] = np.abs(act[eq] - self.b[eq])
        bnd = np.maximum(np.maximum(self.lb - x, x - self.ub), 0.0)
        out = 0.0
        if viol.size:
            out = float(viol.max())
        if bnd.size:
            out = max(out, float(bnd.max()))
        return out

    def with_bounds(self, lb=None, ub=None) -> "LpInstance":
        return replace(
            self,
            lb=self.lb.copy() if lb is None else np.asarray(lb, dtype=float),
            ub=self.ub.copy() if ub is None else np.asarray(ub, dtype=float),
        )

    def with_rhs(self, b) -> "LpInstance":
        return replace(self, b=np.asarray(b, dtype=float))


@dataclass
class MilpInstance:
    lp: LpInstance
    binaries: np.ndarray

    def __post_init__(self):
        self.binaries = np.unique(np.asarray(self.binaries, dtype=int).ravel())
        if self.binaries.size and (self.binaries.min() < 0 or self.binaries.max() >= self.lp.n):
            raise DimensionError("binary index outside the column range")
        lb = self.lp.lb[self.binaries]
        ub = self.lp.ub[self.binaries]
        if (lb < 0).any() or (ub > 1).any():
            # tighten to the unit box; a binary cannot take any other value
            self.lp = self.lp.with_bounds(
                lb=_set(self.lp.lb, self.binaries, np.maximum(lb, 0.0)),
                ub=_set(self.lp.ub, self.binaries, np.minimum(ub, 1.0)),
            )
        if (self.lp.lb[self.binaries] > self.lp.ub[self.binaries]).any():
            raise ValueError("binary bounds exclude both 0 and 1")

    @property
    def is_binary(self) -> np.ndarray:
        mask = np.zeros(self.lp.n, dtype=bool)
        mask[self.binaries] = True
        return mask


def _set(v, idx, vals):
    v = v.copy()
    v[idx] = vals
    return v


# column status codes inside a basis
BASIC, AT_LOWER, AT_UPPER, AT_ZERO = 0, 1, 2, 3


@dataclass
class Basis:
    """Simplex basis over structural + slack columns (slack j = n + row)."""

    head: np.ndarray
    status: np.ndarray


def remap_basis(basis: Basis, col_map, row_map, n_new: int, m_new: int) -> Basis:
    """Carry a basis over to a grown instance.

    ``col_map[j]`` / ``row_map[i]`` give the new position of old column j / row i.
    Rows without a preimage enter with their slack basic; new columns enter
    nonbasic at the lower bound (the solver repairs statuses that point at
    missing bounds).
    """
    col_map = np.asarray(col_map, dtype=int)
    row_map = np.asarray(row_map, dtype=int)
    n_old, m_old = col_map.size, row_map.size
    full = np.concatenate([col_map, n_new + row_map])
    fresh = np.setdiff1d(np.arange(m_new), row_map)
    head = np.concatenate([full[np.asarray(basis.head, dtype=int)], n_new + fresh])
    status = np.full(n_new + m_new, AT_LOWER, dtype=np.int8)
    status[full] = np.asarray(basis.status)[: n_old + m_old]
    status[head] = BASIC
    return Basis(head, status)


def extend_basis(basis: Basis, n_old: int, m_old: int, n_new: int, m_new: int) -> Basis:
    """:func:`remap_basis` for an instance that only gained trailing columns and rows."""
    if n_new < n_old or m_new < m_old:
        raise ValueError("instance may only grow")
    return remap_basis(basis, np.arange(n_old), np.arange(m_old), n_new, m_new)


@dataclass
class LpSolution:
    status: str
    objective: float = float("nan")
    x: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    reduced_costs: Optional[np.ndarray] = None
    iterations: int = 0
    basis: Optional[Basis] = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def dual_objective(self, inst: LpInstance) -> float:
        """b'y plus the bound terms of the reduced costs, plus the offset."""
        if self.duals is None or self.reduced_costs is None:
            raise ValueError("solution carries no dual information")
        d = self.reduced_costs
        x = self.x
        # a reduced cost is charged to the bound the column sits on
        at_bound = np.where(d > 0, inst.lb, np.where(d < 0, inst.ub, 0.0))
        at_bound = np.where(np.isfinite(at_bound), at_bound, x)
        return float(inst.b @ self.duals + d @ at_bound) + inst.offset

    def certified_bound(self, inst: LpInstance) -> float:
        """Lower bound implied by the duals after forcing them dual feasible.

        Row duals with the wrong sign are zeroed, reduced costs recomputed,
        and every reduced cost is charged at the worst bound of its column
        (``-inf`` when that bound is missing).  Equals the objective at an
        exact optimum.
        """
        if self.duals is None:
            raise ValueError("solution carries no dual information")
        y = self.duals.copy()
        y[(inst.senses == LE) & (y > 0)] = 0.0
        y[(inst.senses == GE) & (y < 0)] = 0.0
        d = inst.c - inst.A.T @ y
        # rounding-level reduced costs of columns without the matching bound count as zero
        noise = 1e-9 * max(1.0, float(np.abs(inst.c).max(initial=0.0)))
        d[(np.abs(d) <= noise) & ~(np.isfinite(inst.lb) & np.isfinite(inst.ub))] = 0.0
        pos, neg = d > 0, d < 0
        if (pos & ~np.isfinite(inst.lb)).any() or (neg & ~np.isfinite(inst.ub)).any():
            return -np.inf
        return float(inst.b @ y + d[pos] @ inst.lb[pos] + d[neg] @ inst.ub[neg]) + inst.offset


@dataclass
class MilpSolution:
    status: str
    objective: float = float("nan")
    x: Optional[np.ndarray] = None
    bound: float = float("nan")
    nodes: int = 0
    integral: bool = False
    lp_iterations: int = 0
    root_basis: Optional[Basis] = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def build_instance(
    c: Sequence[float],
    rows: Sequence[tuple],
    lb: Sequence[float],
    ub: Sequence[float],
    offset: float = 0.0,
) -> LpInstance:
    """Assemble an instance from ``(coef_dict, sense, rhs)`` rows; mostly for tests."""
    n = len(c)
    ri, ci, vals, senses, b = [], [], [], [], []
    for i, (coefs, sense, rhs) in enumerate(rows):
        for j, v in coefs.items():
            ri.append(i)
            ci.append(j)
            vals.append(v)
        senses.append(sense)
        b.append(rhs)
    A = sp.csc_matrix((vals, (ri, ci)), shape=(len(rows), n))
    return LpInstance(c=c, A=A, senses=np.array(senses, dtype="<U1"), b=b, lb=lb, ub=ub, offset=offset)
