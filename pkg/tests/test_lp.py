"""Simplex, branch and bound, basis reuse and the LP text dump."""

import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from hydrogep.lp import (
    EQ, GE, LE, DimensionError, LpInstance, MilpInstance, NumericalError, build_instance,
    dump_lp, extend_basis, solve_lp, solve_milp,
)
from hydrogep.lp.bnb import prune_tolerance

from conftest import highs_lp, highs_value


def _random_lp(rng, m, n, free_frac=0.2):
    A = rng.normal(size=(m, n)) * (rng.random((m, n)) < 0.5)
    senses = rng.choice([LE, EQ, GE], size=m, p=[0.5, 0.2, 0.3])
    x0 = rng.uniform(-1, 2, size=n)
    b = A @ x0 + np.where(senses == LE, rng.random(m), np.where(senses == GE, -rng.random(m), 0))
    lb = np.where(rng.random(n) < free_frac, -np.inf, rng.uniform(-2, 0, n))
    ub = np.where(rng.random(n) < 0.3, np.inf, lb + rng.uniform(0, 4, n))
    ub = np.where(np.isinf(lb) & np.isinf(ub), 5.0, ub)
    lb = np.minimum(lb, x0)
    ub = np.maximum(ub, x0)
    return LpInstance(c=rng.normal(size=n), A=sp.csc_matrix(A), senses=senses, b=b, lb=lb, ub=ub)


def vertex_enumeration(c, A, b):
    """min c'x, A x <= b, x >= 0 by trying every basis of the slack form."""
    m, n = A.shape
    M = np.hstack([A, np.eye(m)])
    cc = np.concatenate([c, np.zeros(m)])
    best = np.inf
    for basis in itertools.combinations(range(n + m), m):
        B = M[:, basis]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        xb = np.linalg.solve(B, b)
        if (xb < -1e-9).any():
            continue
        best = min(best, float(cc[list(basis)] @ xb))
    return best


class TestSimplexExamples:
    def test_single_variable(self):
        inst = build_instance([1.0], [({0: 1.0}, GE, 1.0)], lb=[0.0], ub=[10.0])
        sol = solve_lp(inst)
        assert sol.optimal
        assert sol.objective == pytest.approx(1.0)
        assert sol.duals[0] == pytest.approx(1.0)

    def test_symmetric_pair(self):
        inst = build_instance([-1.0, -1.0], [({0: 1.0, 1: 1.0}, LE, 1.0)], lb=[0, 0], ub=[np.inf, np.inf])
        sol = solve_lp(inst)
        assert sol.objective == pytest.approx(-1.0)
        assert sol.duals[0] == pytest.approx(-1.0)

    def test_infeasible_and_unbounded(self):
        inf = build_instance([1.0], [({0: 1.0}, GE, 2.0)], lb=[0.0], ub=[1.0])
        assert solve_lp(inf).status == "infeasible"
        unb = build_instance([-1.0], [({0: 1.0}, GE, 0.0)], lb=[0.0], ub=[np.inf])
        assert solve_lp(unb).status == "unbounded"

    def test_free_variable_equality(self):
        inst = build_instance([1.0, 2.0], [({0: 1.0, 1: -1.0}, EQ, 3.0)], lb=[-np.inf, 0.0], ub=[np.inf, 4.0])
        sol = solve_lp(inst)
        assert sol.objective == pytest.approx(3.0)
        assert sol.x == pytest.approx([3.0, 0.0])

    @pytest.mark.parametrize("seed", range(5))
    def test_twenty_variables_vertex_enumeration(self, seed):
        rng = np.random.default_rng(100 + seed)
        m, n = 4, 20
        A = rng.uniform(0.1, 2.0, size=(m, n))
        b = rng.uniform(5, 10, size=m)
        c = -rng.uniform(0.5, 2.0, size=n)
        inst = LpInstance(c=c, A=sp.csc_matrix(A), senses=np.full(m, LE), b=b, lb=np.zeros(n), ub=np.full(n, np.inf))
        sol = solve_lp(inst)
        assert sol.objective == pytest.approx(vertex_enumeration(c, A, b), abs=1e-6)


class TestSimplexContracts:
    def test_random_against_highs(self):
        rng = np.random.default_rng(0)
        for _ in range(150):
            inst = _random_lp(rng, int(rng.integers(1, 25)), int(rng.integers(1, 25)))
            sol = solve_lp(inst)
            ref_status, ref = highs_lp(inst)
            assert sol.status == ref_status
            if not sol.optimal:
                continue
            assert sol.objective == pytest.approx(ref, abs=1e-6 * (1 + abs(ref)))
            assert inst.primal_residual(sol.x) <= 1e-7 * (1 + np.abs(inst.b).max())
            assert abs(sol.dual_objective(inst) - sol.objective) <= 1e-6 * (1 + abs(sol.objective))

    def test_dual_signs(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            inst = _random_lp(rng, 12, 10, free_frac=0.0)
            sol = solve_lp(inst)
            if not sol.optimal:
                continue
            y = sol.duals
            assert (y[inst.senses == LE] <= 1e-9).all()
            assert (y[inst.senses == GE] >= -1e-9).all()

    def test_badly_scaled_rows(self):
        # cut-like rows mixing 1e-11 and 1e+9 coefficients
        rng = np.random.default_rng(5)
        for _ in range(20):
            inst = _random_lp(rng, 10, 8, free_frac=0.0)
            A = inst.A.toarray()
            A[0] *= 1e9
            A[1, 0] = 7e-11
            inst = LpInstance(c=inst.c * 1e6, A=sp.csc_matrix(A), senses=inst.senses,
                              b=np.concatenate([[inst.b[0] * 1e9], inst.b[1:]]), lb=inst.lb, ub=inst.ub)
            sol = solve_lp(inst)
            status, ref = highs_lp(inst)
            assert sol.status == status
            if status == "optimal":
                assert sol.objective == pytest.approx(ref, rel=1e-6, abs=1e-6)

    def test_warm_start_matches_cold(self):
        rng = np.random.default_rng(1)
        for _ in range(40):
            m, n = 30, 40
            A = rng.normal(size=(m, n)) * (rng.random((m, n)) < 0.3)
            senses = rng.choice([LE, EQ, GE], size=m, p=[0.6, 0.1, 0.3])
            x0 = rng.uniform(0, 1, size=n)
            b = A @ x0 + np.where(senses == LE, rng.random(m), np.where(senses == GE, -rng.random(m), 0))
            inst = LpInstance(c=rng.normal(size=n), A=sp.csc_matrix(A), senses=senses, b=b,
                              lb=np.zeros(n), ub=np.full(n, 2.0))
            first = solve_lp(inst)
            moved = inst.with_rhs(b + rng.normal(size=m) * 0.05)
            cold, warm = solve_lp(moved), solve_lp(moved, basis=first.basis)
            assert cold.status == warm.status
            if cold.optimal:
                assert warm.objective == pytest.approx(cold.objective, abs=1e-8 * (1 + abs(cold.objective)))

    def test_extended_basis_after_new_rows(self):
        rng = np.random.default_rng(7)
        inst = _random_lp(rng, 10, 12, free_frac=0.0)
        sol = solve_lp(inst)
        extra = sp.csc_matrix(rng.normal(size=(3, 12)))
        bigger = LpInstance(c=inst.c, A=sp.vstack([inst.A, extra], format="csc"),
                            senses=np.concatenate([inst.senses, [LE, LE, GE]]),
                            b=np.concatenate([inst.b, extra @ sol.x + [0.1, -0.2, -0.5]]), lb=inst.lb, ub=inst.ub)
        warm = solve_lp(bigger, basis=extend_basis(sol.basis, 12, 10, 12, 13))
        assert warm.objective == pytest.approx(solve_lp(bigger).objective, abs=1e-8)

    def test_malformed_instance(self):
        with pytest.raises(DimensionError):
            LpInstance(c=[1.0, 2.0], A=sp.csc_matrix(np.ones((1, 3))), senses=[LE], b=[1.0],
                       lb=[0, 0], ub=[1, 1]).validate()
        with pytest.raises(ValueError):
            LpInstance(c=[np.nan], A=sp.csc_matrix(np.ones((1, 1))), senses=[LE], b=[1.0],
                       lb=[0], ub=[1]).validate()
        with pytest.raises(ValueError):
            LpInstance(c=[1.0], A=sp.csc_matrix(np.ones((1, 1))), senses=[LE], b=[1.0],
                       lb=[2], ub=[1]).validate()

    def test_iteration_limit_is_an_error(self):
        from hydrogep.lp import SolverConfig

        rng = np.random.default_rng(2)
        inst = _random_lp(rng, 20, 20)
        with pytest.raises(NumericalError):
            solve_lp(inst, config=SolverConfig(max_iter_factor=0))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_strong_duality_property(self, seed):
        rng = np.random.default_rng(seed)
        inst = _random_lp(rng, int(rng.integers(1, 15)), int(rng.integers(1, 15)))
        sol = solve_lp(inst)
        if not sol.optimal:
            assert sol.status == highs_lp(inst)[0]
            return
        assert abs(sol.dual_objective(inst) - sol.objective) <= 1e-6 * (1 + abs(sol.objective))
        assert abs(sol.certified_bound(inst) - sol.objective) <= 1e-6 * (1 + abs(sol.objective))


def _enumerate(inst: MilpInstance):
    lp, nb = inst.lp, inst.binaries
    best = np.inf
    for z in itertools.product([0, 1], repeat=nb.size):
        lb, ub = lp.lb.copy(), lp.ub.copy()
        lb[nb] = z
        ub[nb] = z
        r = solve_lp(lp.with_bounds(lb, ub))
        if r.optimal:
            best = min(best, r.objective)
    return best


class TestBranchAndBound:
    def test_knapsack(self):
        inst = MilpInstance(build_instance([-3.0, -2.0], [({0: 1.0, 1: 1.0}, LE, 1.0)], lb=[0, 0], ub=[1, 1]), [0, 1])
        sol = solve_milp(inst)
        assert -sol.objective == pytest.approx(3.0)
        assert sol.x[0] == 1.0 and sol.x[1] == 0.0

    def test_all_fixed_is_lp(self):
        rng = np.random.default_rng(4)
        lp = _random_lp(rng, 8, 6, free_frac=0.0)
        x = solve_lp(lp).x
        lb, ub = lp.lb.copy(), lp.ub.copy()
        lb[:2] = ub[:2] = np.clip(np.round(x[:2]), lb[:2], ub[:2])
        fixed = lp.with_bounds(lb, ub)
        inst = MilpInstance(fixed, [0, 1])
        if np.all((lb[:2] == 0) | (lb[:2] == 1)):
            sol, ref = solve_milp(inst), solve_lp(fixed)
            assert sol.status == ref.status
            if ref.optimal:
                assert sol.objective == pytest.approx(ref.objective)

    def test_infeasible(self):
        inst = MilpInstance(build_instance([1.0], [({0: 1.0}, EQ, 0.5)], lb=[0], ub=[1]), [0])
        assert solve_milp(inst).status == "infeasible"

    @pytest.mark.parametrize("seed", range(12))
    def test_matches_enumeration(self, seed):
        rng = np.random.default_rng(200 + seed)
        m, n, nb = 14, 13, 8 if seed < 8 else 12
        A = rng.normal(size=(m, n)) * (rng.random((m, n)) < 0.5)
        senses = rng.choice([LE, GE], size=m, p=[0.7, 0.3])
        x0 = np.concatenate([rng.integers(0, 2, nb), rng.uniform(0, 1, n - nb)])
        b = A @ x0 + np.where(senses == LE, rng.random(m), -rng.random(m))
        lp = LpInstance(c=rng.normal(size=n), A=sp.csc_matrix(A), senses=senses, b=b,
                        lb=np.zeros(n), ub=np.full(n, 1.5))
        inst = MilpInstance(lp, np.arange(nb))
        sol = solve_milp(inst)
        ref = _enumerate(inst)
        assert sol.objective == pytest.approx(ref, abs=prune_tolerance(ref))
        assert sol.bound <= sol.objective + 1e-12
        xb = sol.x[inst.binaries]
        assert np.all(np.abs(xb - np.round(xb)) <= 1e-6)


def test_lp_dump(tmp_path):
    inst = MilpInstance(build_instance([1.5, -2.0], [({0: 1.0, 1: 1.0}, LE, 4.0), ({1: 1.0}, GE, 0.5)],
                                       lb=[0, -np.inf], ub=[1, np.inf]), [0])
    path = tmp_path / "m.lp"
    dump_lp(inst, path, comment="tiny")
    text = path.read_text().splitlines()
    assert text[0] == "\\ tiny"
    assert "Minimize" in text and "Subject To" in text and "Bounds" in text and text[-1] == "End"
    assert " x1 free" in text
    assert " r0: +1.0 x0 +1.0 x1 <= 4.0" in text
    assert text[text.index("Binaries") + 1] == " x0"
