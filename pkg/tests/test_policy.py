import json

import numpy as np
import pytest

from hydrogep.decomp import evaluate_subproblem, solve
from hydrogep.model import compile_compact, d1_spec, d1_system
from hydrogep.policy import (
    OperationReport, Simulation, compare_policies, nearest_rank, policy_metrics, refit_ldr,
    simulate, write_metrics, write_quantiles,
)
from hydrogep.scenario import deterministic, generate

from test_model import D1_DE


@pytest.fixture(scope="module")
def d1_de_run(d1_compact):
    return solve(d1_compact, "de")


def test_nearest_rank_by_hand():
    v = [10.0, 30.0, 20.0, 40.0]
    p = [0.1, 0.2, 0.3, 0.4]
    # sorted 10 (0.1), 20 (0.4), 30 (0.6), 40 (1.0)
    assert nearest_rank(v, p, 0.05) == 10.0
    assert nearest_rank(v, p, 0.4) == 20.0
    assert nearest_rank(v, p, 0.5) == 30.0
    assert nearest_rank(v, p, 0.95) == 40.0
    assert nearest_rank([5.0], [1.0], 0.95) == 5.0


def _sim(stage_prices, prob, costs, deficits):
    reports = [OperationReport(w, c, np.zeros(0), np.asarray(sp, float), d, 0.0)
               for w, (sp, c, d) in enumerate(zip(stage_prices, costs, deficits))]
    return Simulation(np.zeros(1), np.asarray(prob, float), reports, 100.0)


def test_metrics_by_hand():
    sim = _sim([[10.0, 20.0], [30.0, 15.0]], [0.5, 0.5], [200.0, 400.0], [0.0, 3.0])
    m = policy_metrics(sim, in_sample_total=350.0)
    assert m.expected_total_cost == pytest.approx(400.0)
    assert m.regret == pytest.approx(50.0)
    assert m.average_spot_price == pytest.approx(0.5 * 15 + 0.5 * 22.5)
    # pooled 10, 15, 20, 30 at 0.25 each
    assert m.p95_spot_price == 30.0
    # stage 1: q95 - q05 = 30 - 10, stage 2: 20 - 15
    assert m.uncertainty_level == pytest.approx(12.5)
    assert m.time_variability == pytest.approx(0.5 * 1.0 + 0.5 * 0.5)
    assert m.deficit_probability == pytest.approx(0.5)
    assert m.variability_skips == 0


def test_near_zero_prices_skipped():
    sim = _sim([[0.0, 20.0], [10.0, 10.0]], [0.5, 0.5], [1.0, 1.0], [0.0, 0.0])
    m = policy_metrics(sim, 0.0)
    assert m.variability_skips == 1
    assert m.time_variability == pytest.approx(0.0)


def test_refit_recovers_optimum(d1_compact, d1_de_run):
    cm = d1_compact
    x, obj = refit_ldr(cm, d1_de_run.x[cm.layout.inv])
    assert obj == pytest.approx(D1_DE, rel=1e-9)
    assert np.array_equal(x[cm.layout.inv], np.round(d1_de_run.x[cm.layout.inv]))
    with pytest.raises(ValueError):
        refit_ldr(cm, np.full(cm.layout.n_units, 0.5))
    with pytest.raises(ValueError):
        refit_ldr(cm, np.zeros(cm.layout.n_units))  # existing units must stay


def test_in_sample_simulation_reproduces_objective(d1_case, d1_compact, d1_de_run):
    system, scen = d1_case
    x, obj = refit_ldr(d1_compact, d1_de_run.x[d1_compact.layout.inv])
    sim = simulate(system, x, scen)
    assert sim.total == pytest.approx(obj, rel=1e-9)
    assert all(r.rule_violation <= 1e-6 for r in sim.reports)


def test_rule_reconstruction(d1_case, d1_compact, d1_de_run):
    system, scen = d1_case
    cm, x = d1_compact, d1_de_run.x
    keys = cm.key_index()
    lay = cm.layout
    for w in range(cm.n_scenarios):
        y = evaluate_subproblem(cm, x, w, keep_y=True).y
        for t in range(lay.n_stages):
            u = np.array([y[keys[("u", h, t)]] for h in range(lay.n_hydro)])
            assert np.abs(u - lay.rule_release(x, scen.inflow[w, t], t)).max() <= 1e-9


def test_workers_do_not_change_simulation(d1_case, d1_de_run):
    system, scen = d1_case
    oos = generate(d1_spec(), system, 20, 77)
    a = simulate(system, d1_de_run.x, oos, workers=1)
    b = simulate(system, d1_de_run.x, oos, workers=3)
    assert a.total == b.total
    assert np.array_equal(a.stage_prices, b.stage_prices)


def test_deterministic_case_has_no_value():
    # with one scenario the rule intercept can follow any release schedule
    system = d1_system()
    scen = deterministic(system, inflow=[75.0, 20.0])
    c = compare_policies(system, scen, scen, allow_overlap=True)
    assert c.in_sample_anticipative == pytest.approx(c.nonanticipative.in_sample_total_cost, rel=1e-9)
    assert abs(c.vnap) <= 1e-6 * abs(c.nonanticipative.expected_total_cost)
    with pytest.raises(ValueError):
        compare_policies(system, scen, scen)


def test_anticipative_bound_and_artifacts(tmp_path, d1_case):
    system, scen = d1_case
    oos = generate(d1_spec(), system, 16, 99)
    c = compare_policies(system, scen, oos)
    assert c.in_sample_anticipative <= c.nonanticipative.in_sample_total_cost + 1e-6 * D1_DE
    assert c.vnap == pytest.approx(c.anticipative.expected_total_cost - c.nonanticipative.expected_total_cost)
    write_metrics(tmp_path / "m.json", {"nonanticipative": c.nonanticipative}, {"seed": 99})
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["schema"] == "gep-metrics/1" and doc["seed"] == 99
    assert doc["policies"]["nonanticipative"]["vnap"] == pytest.approx(c.vnap)
    write_quantiles(tmp_path / "q.csv", c.simulations)
    lines = (tmp_path / "q.csv").read_text().splitlines()
    assert lines[0].startswith("# schema=gep-price-quantiles/1")
    assert lines[1] == "stage,policy,q05,q50,q95"
    assert len(lines) == 2 + 2 * system.n_stages
    for row in lines[2:]:
        q05, q50, q95 = map(float, row.split(",")[2:])
        assert q05 <= q50 <= q95
