import itertools

import numpy as np
import pytest

from hydrogep.lp import solve_lp, solve_milp
from hydrogep.model import (
    ModelError, SystemData, Thermal, build_de, compile_compact, load_system, model_statistics,
    reassemble_de, save_system, validate,
)
from hydrogep.scenario import deterministic

from conftest import highs_value

# Frozen D1 optimum, agreed by our branch and bound, HiGHS and 2^4 enumeration.
D1_DE = 15974733.707687488


def one_bus(invest_cost=300.0, demand=10.0):
    """Existing thermal at 50 $/MWh, candidate at 10 $/MWh, one hour."""
    return SystemData(
        name="tiny", buses=("A",), lines=(),
        thermals=(Thermal("old", "A", capacity=100.0, cost=50.0),
                  Thermal("new", "A", capacity=100.0, cost=10.0, existing=False, invest_cost=invest_cost)),
        renewables=(), hydros=(), hours_per_day=1, day_weights=np.array([[1.0]]),
        demand=np.full((1, 1, 1, 1), demand),
    )


def test_hand_solved_instance():
    # build: 300 + 10 * 10 = 400 against 50 * 10 = 500 without
    sysd = one_bus()
    de = solve_milp(build_de(sysd, deterministic(sysd)))
    assert de.objective == pytest.approx(400.0, abs=1e-9)
    assert de.x[1] == pytest.approx(1.0)
    # at 450 the candidate no longer pays
    sysd = one_bus(invest_cost=450.0)
    de = solve_milp(build_de(sysd, deterministic(sysd)))
    assert de.objective == pytest.approx(500.0, abs=1e-9)
    assert de.x[1] == pytest.approx(0.0)


def test_deficit_keeps_recourse_complete():
    # 250 MW of demand against 100 MW existing: 150 MWh at the deficit cost
    sysd = one_bus(invest_cost=1e9, demand=250.0)
    de = solve_milp(build_de(sysd, deterministic(sysd)))
    assert de.objective == pytest.approx(100 * 50.0 + 150 * 1000.0, rel=1e-12)


def test_d1_dimensions(d1_case, d1_compact):
    system, scen = d1_case
    cm = d1_compact
    assert len(system.buses) == 3 and len(system.lines) == 2
    assert sum(u.existing for u in system.units) == 2 and sum(not u.existing for u in system.units) == 4
    assert system.n_stages == 3 and system.n_days == 2 and system.hours_per_day == 4
    assert scen.count == 3
    assert cm.layout.n_units == 6 and cm.layout.n_hydro == 2
    assert cm.n1 == 6 + 2 * 3 + 2 * 3 * 2
    stats = model_statistics(cm)
    assert stats["deterministic_equivalent"]["columns"] == cm.n1 + 3 * cm.n2


def test_d1_de_two_routes(d1_case):
    system, scen = d1_case
    de = build_de(system, scen)
    sol = solve_milp(de)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(D1_DE, rel=1e-9)
    # independent route: every investment vector as an LP
    cand = [i for i, u in enumerate(system.units) if not u.existing]
    best = np.inf
    for bits in itertools.product([0.0, 1.0], repeat=len(cand)):
        lb, ub = de.lp.lb.copy(), de.lp.ub.copy()
        lb[cand] = ub[cand] = bits
        r = solve_lp(de.lp.with_bounds(lb, ub))
        assert r.optimal
        best = min(best, r.objective)
    assert abs(best - sol.objective) <= 1e-6 * abs(sol.objective)


def test_d1_de_against_highs(d1_case):
    de = build_de(*d1_case)
    assert highs_value(de.lp, de.binaries) == pytest.approx(D1_DE, rel=1e-9)


def test_compact_reassembles_to_direct_de(d1_case, d1_compact):
    a = build_de(*d1_case).lp
    b = reassemble_de(d1_compact).lp
    assert a.m == b.m and a.n == b.n
    ra, rb = solve_lp(a), solve_lp(b)
    assert ra.objective == pytest.approx(rb.objective, rel=1e-10)


def test_anticipative_relaxation_is_lower(d1_case):
    system, scen = d1_case
    na = solve_milp(build_de(system, scen)).objective
    an = solve_milp(build_de(system, scen, anticipative=True)).objective
    assert an <= na + 1e-6 * abs(na)


def test_existing_units_fixed(d1_compact):
    cm = d1_compact
    inv = cm.layout.inv
    assert np.array_equal(cm.first_lb[inv] == cm.first_ub[inv],
                          np.array([True, False, False, False, True, False]))


def test_structure_shared_across_scenarios(d1_compact):
    cm = d1_compact
    assert len(cm.T) == cm.n_scenarios
    assert cm.h.shape[0] == cm.f.shape[0] == cm.n_scenarios
    assert np.isclose(cm.prob.sum(), 1.0)


def test_system_round_trip(tmp_path, d1_case):
    system, _ = d1_case
    p = tmp_path / "sys.json"
    save_system(system, p)
    back = load_system(p)
    assert back.fingerprint() == system.fingerprint()


def test_validation_messages():
    bad = one_bus().with_units(thermals=(Thermal("x", "nowhere", capacity=-1.0, cost=1.0),))
    diags = validate(bad)
    assert any("unknown bus" in d for d in diags)
    assert any("negative capacity" in d for d in diags)
    with pytest.raises(ModelError):
        build_de(bad, deterministic(one_bus()))


def test_scenario_grid_mismatch(d1_case):
    system, _ = d1_case
    with pytest.raises(ModelError):
        compile_compact(system, deterministic(one_bus()))
