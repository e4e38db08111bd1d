"""Best-first branch and bound over binary columns."""

from __future__ import annotations

import heapq
import itertools

import numpy as np

from .model import (
    DEFAULT_CONFIG, INFEASIBLE, OPTIMAL, UNBOUNDED,
    Basis, MilpInstance, MilpSolution, SolverConfig,
)
from .simplex import solve_lp

INTEGRALITY_TOL = 1e-6


def prune_tolerance(incumbent: float) -> float:
    return 1e-6 * (1.0 + abs(incumbent))


def solve_milp(
    inst: MilpInstance,
    basis: Basis | None = None,
    config: SolverConfig = DEFAULT_CONFIG,
    node_limit: int = 100_000,
) -> MilpSolution:
    """Solve a mixed-binary program to proven optimality.

    Nodes are explored lowest LP bound first; the branching column is the most
    fractional binary with ties going to the lowest index.  Each child LP is
    warm-started from its parent's optimal basis.  ``bound`` on the result is
    the best proven lower bound when the search stopped.
    """
    lp = inst.lp
    bins = inst.binaries
    counter = itertools.count()
    heap: list = []
    nodes = 0
    lp_iters = 0
    best_x = None
    best_obj = np.inf
    root_basis = None

    def solve_node(lb, ub, warm):
        nonlocal lp_iters
        sol = solve_lp(lp.with_bounds(lb=lb, ub=ub), basis=warm, config=config)
        lp_iters += sol.iterations
        return sol

    root = solve_node(lp.lb.copy(), lp.ub.copy(), basis)
    nodes += 1
    if root.status == UNBOUNDED:
        return MilpSolution(status=UNBOUNDED, nodes=nodes, lp_iterations=lp_iters)
    if root.status == INFEASIBLE:
        return MilpSolution(status=INFEASIBLE, nodes=nodes, lp_iterations=lp_iters)
    root_basis = root.basis
    heapq.heappush(heap, (root.objective, next(counter), lp.lb.copy(), lp.ub.copy(), root))

    open_bound = np.inf
    while heap:
        bound, _, lb, ub, sol = heapq.heappop(heap)
        if best_x is not None and bound >= best_obj - prune_tolerance(best_obj):
            # best-first: every open node is at least this bad
            open_bound = bound
            break
        xb = sol.x[bins]
        frac = np.abs(xb - np.round(xb))
        if bins.size == 0 or frac.max() <= INTEGRALITY_TOL:
            if sol.objective < best_obj:
                best_obj = sol.objective
                best_x = sol.x.copy()
                best_x[bins] = np.round(best_x[bins])
            continue
        k = int(np.argmax(frac))  # first maximiser = lowest index on ties
        j = int(bins[k])
        for val in (0.0, 1.0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = val
            child = solve_node(clb, cub, sol.basis)
            nodes += 1
            if nodes > node_limit:
                raise RuntimeError(f"branch-and-bound node limit {node_limit} exceeded")
            if child.status != OPTIMAL:
                continue
            if best_x is not None and child.objective >= best_obj - prune_tolerance(best_obj):
                continue
            heapq.heappush(heap, (child.objective, next(counter), clb, cub, child))

    if best_x is None:
        return MilpSolution(status=INFEASIBLE, nodes=nodes, lp_iterations=lp_iters)
    return MilpSolution(
        status=OPTIMAL,
        objective=float(lp.objective(best_x)),
        x=best_x,
        bound=float(min(best_obj, open_bound)),
        nodes=nodes,
        integral=True,
        lp_iterations=lp_iters,
        root_basis=root_basis,
    )
