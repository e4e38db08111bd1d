from importlib import resources

import numpy as np
import pytest

from hydrogep.model import d1_spec, d1_system
from hydrogep.scenario import (
    InflowParams, ScenarioFormatError, ScenarioSpec, generate, load_csv, save_csv, split,
)


@pytest.fixture(scope="module")
def system():
    return d1_system()


def test_same_seed_same_scenarios(system):
    a = generate(d1_spec(), system, 7, 11)
    b = generate(d1_spec(), system, 7, 11)
    c = generate(d1_spec(), system, 7, 12)
    assert a.equals(b) and a.fingerprint() == b.fingerprint()
    assert not a.equals(c)


def test_zero_cv_gives_seasonal_mean(system):
    spec = ScenarioSpec(inflows={"H-up": InflowParams(mean=75.0, cv=0.0, phi=0.5),
                                 "H-down": InflowParams(mean=20.0, cv=0.0, phi=0.5)},
                        seasonality=(1.2, 0.9, 0.7))
    s = generate(spec, system, 5, 3)
    want = np.array([75.0, 20.0])[None, :] * np.array([1.2, 0.9, 0.7])[:, None]
    assert np.allclose(s.inflow, want[None], rtol=1e-12)


def test_lag_one_autocorrelation(system):
    spec = ScenarioSpec(inflows={"H-up": InflowParams(mean=75.0, cv=0.4, phi=0.5)})
    s = generate(spec, system, 10000, 5)
    z = np.log(s.inflow[:, :, 0])
    rho = np.corrcoef(z[:, 0], z[:, 1])[0, 1]
    assert 0.45 <= rho <= 0.55


def test_lognormal_mean_and_cv(system):
    spec = ScenarioSpec(inflows={"H-up": InflowParams(mean=75.0, cv=0.3, phi=0.0)})
    a = generate(spec, system, 20000, 8).inflow[:, 0, 0]
    assert a.mean() == pytest.approx(75.0, rel=0.02)
    assert a.std() / a.mean() == pytest.approx(0.3, rel=0.05)


def test_capacity_factors_in_unit_interval(system):
    s = generate(d1_spec(), system, 50, 2)
    assert s.capacity_factor.min() >= 0.0 and s.capacity_factor.max() <= 1.0
    assert (s.demand_mult > 0).all()
    assert np.isclose(s.prob.sum(), 1.0)


def test_csv_round_trip(tmp_path, system):
    s = generate(d1_spec(), system, 4, 9)
    p = tmp_path / "s.csv"
    save_csv(s, p)
    back = load_csv(p)
    assert back.equals(s)
    assert back.seed == 9


def test_empty_csv_is_an_error(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(ScenarioFormatError):
        load_csv(p)


def test_bad_probabilities_rejected(tmp_path, system):
    s = generate(d1_spec(), system, 2, 1)
    p = tmp_path / "s.csv"
    save_csv(s, p)
    text = p.read_text().replace(",probability,,,,,0.5", ",probability,,,,,0.7", 1)
    p.write_text(text)
    with pytest.raises((ScenarioFormatError, ValueError)):
        load_csv(p)


def test_split_is_disjoint_and_deterministic(system):
    s = generate(d1_spec(), system, 20, 4)
    a_in, a_out = split(s, 6, 1)
    b_in, _ = split(s, 6, 1)
    assert a_in.equals(b_in)
    assert a_in.count == 6 and a_out.count == 14
    rows_in = {a_in.inflow[w].tobytes() for w in range(a_in.count)}
    assert not any(a_out.inflow[w].tobytes() in rows_in for w in range(a_out.count))
    with pytest.raises(ValueError):
        split(s, 20, 1)


def test_bundled_two_scenario_file():
    path = resources.files("hydrogep.data").joinpath("d1_two_scenarios.csv")
    with resources.as_file(path) as p:
        s = load_csv(p)
    assert s.count == 2
    assert np.allclose(s.prob, [0.5, 0.5])
    # the wet scenario brings more water in every stage
    assert (s.inflow[0] > s.inflow[1]).all() or (s.inflow[1] > s.inflow[0]).all()


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec(inflows={"H-up": InflowParams(mean=1.0, phi=1.0)}).check()
    with pytest.raises(ValueError):
        generate(d1_spec(), d1_system(), 0, 1)
