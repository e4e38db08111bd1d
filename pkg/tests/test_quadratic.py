import itertools

import numpy as np
import pytest

from hydrogep.lp import LE, MilpInstance, apply_separable_quadratic, build_instance, solve_lp, solve_milp
from hydrogep.lp.quadratic import chord_lines


def chord_value(x, center, weight, segments, half_width):
    s, b = chord_lines(center, weight, segments, half_width)
    return float(np.max(s * x + b))


def test_binary_identity_exact():
    # (w/2)(x - c)^2 at x in {0, 1} equals the linearised objective
    rng = np.random.default_rng(0)
    n = 4
    for _ in range(20):
        c0 = rng.normal(size=n)
        center = rng.uniform(-1, 2, n)
        w = rng.uniform(0, 5, n)
        lp = build_instance(c0, [], lb=np.zeros(n), ub=np.ones(n))
        q = apply_separable_quadratic(MilpInstance(lp, np.arange(n)), center, w, 4, 1.0).lp
        for x in itertools.product([0.0, 1.0], repeat=n):
            x = np.array(x)
            exact = c0 @ x + np.sum(0.5 * w * (x - center) ** 2)
            assert abs(q.c @ x + q.offset - exact) <= 1e-12 * max(1.0, abs(exact))


def test_chords_over_estimate_and_touch_breakpoints():
    center, w, seg, hw = 0.3, 2.0, 6, 1.5
    pts = np.linspace(center - hw, center + hw, seg + 1)
    for x in pts:
        assert chord_value(x, center, w, seg, hw) == pytest.approx(0.5 * w * (x - center) ** 2, abs=1e-12)
    for x in np.linspace(center - hw, center + hw, 401):
        assert chord_value(x, center, w, seg, hw) >= 0.5 * w * (x - center) ** 2 - 1e-12


def test_chord_error_bound():
    # pieces h = 2 * half_width / segments wide; worst gap w h^2 / 8 at the midpoints
    w, seg, hw = 1.0, 4, 2.0
    h = 2 * hw / seg
    xs = np.linspace(-hw, hw, 8001)
    err = max(chord_value(x, 0.0, w, seg, hw) - 0.5 * w * x * x for x in xs)
    assert err == pytest.approx(w * h * h / 8, rel=1e-6)
    assert err == pytest.approx(0.125, rel=1e-6)


def test_penalised_lp_minimum():
    # min x + (2/2)(x - 3)^2 on [0, 5]: true minimiser 2.5; the chord model is exact
    # at breakpoints, which include 2.5 for 8 segments on [1, 5]
    lp = build_instance([1.0], [], lb=[0.0], ub=[5.0])
    q = apply_separable_quadratic(lp, [3.0], [2.0], 8, 2.0)
    sol = solve_lp(q)
    assert sol.x[0] == pytest.approx(2.5, abs=1e-9)
    assert sol.objective == pytest.approx(2.5 + 0.25, abs=1e-9)


def test_mixed_binary_and_continuous():
    lp = build_instance([0.0, 0.0], [({0: 1.0, 1: 1.0}, LE, 3.0)], lb=[0.0, 0.0], ub=[1.0, 4.0])
    inst = MilpInstance(lp, np.array([0]))
    q = apply_separable_quadratic(inst, [0.2, 1.0], [1.0, 1.0], 4, 2.0)
    assert q.lp.n == 3  # one epigraph column for the continuous entry
    sol = solve_milp(q)
    assert sol.x[0] == pytest.approx(0.0) and sol.x[1] == pytest.approx(1.0, abs=1e-9)
    assert sol.objective == pytest.approx(0.5 * 0.04, abs=1e-12)


def test_zero_weight_is_identity():
    lp = build_instance([1.0, 2.0], [], lb=[0, 0], ub=[1, 1])
    assert apply_separable_quadratic(lp, [0, 0], [0, 0], 4, 1.0) is lp


def test_input_checks():
    lp = build_instance([1.0], [], lb=[0.0], ub=[np.inf])
    with pytest.raises(ValueError):
        apply_separable_quadratic(lp, [0.0], [1.0], 4, 1.0)  # unbounded column
    with pytest.raises(ValueError):
        apply_separable_quadratic(lp, [0.0], [-1.0], 4, 1.0)
    with pytest.raises(ValueError):
        apply_separable_quadratic(lp, [0.0], [1.0], 1, 1.0)
