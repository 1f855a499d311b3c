import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invmet.bounds import (
    LocalizationSetup,
    check_localization,
    check_theorem_global,
    f_bound,
    fit_constant,
    g_bound,
    h_eval,
    verify_classical,
)
from invmet.domains import Ball, Polydisc, Tangent, UnitDisc, Window, sample_pair_near
from invmet.extremal import SolverConfig

DISC = UnitDisc()
BALL = Ball(center=[0, 0], radius=1.0)
POLY = Polydisc([1.0, 1.0])
CFG = SolverConfig(restarts=3, maxiter=50)


def test_h_frozen_values():
    assert h_eval(1.0) == pytest.approx(2.8853900817779268, abs=1e-12)
    assert h_eval(2.0) == pytest.approx(5.461435359761024, abs=1e-12)
    assert h_eval(2.0) > h_eval(1.0)


def test_h_limit_and_branch_agreement():
    assert h_eval(1e-12) == pytest.approx(1.0, abs=1e-9)
    x = 1e-4
    series = h_eval(x * (1 - 1e-12))
    direct = x * (1 + x) / math.log1p(x)
    assert series == pytest.approx(direct, abs=1e-12)


@given(st.floats(min_value=1e-8, max_value=50.0))
@settings(max_examples=200, deadline=None)
def test_h_monotone_and_above_one(x):
    assert h_eval(x) >= 1.0
    assert h_eval(x * 1.01) > h_eval(x)


def test_h_rejects_nonpositive():
    with pytest.raises(ValueError):
        h_eval(0.0)
    with pytest.raises(ValueError):
        h_eval(-1.0)


def test_f_bound_frozen():
    assert f_bound(DISC, [0.9], [0.95]) == pytest.approx(0.01128559076800414, rel=1e-10)
    assert f_bound(DISC, [0.0], [0.1]) == pytest.approx(1.0464268540941941, rel=1e-10)
    # degenerate pair: the h factor collapses to its limit
    assert f_bound(DISC, [0.5], [0.5]) == pytest.approx(0.25)


def test_g_bound_frozen():
    assert g_bound(DISC, [0.9], [0.95]) == pytest.approx(0.006035533905932739, rel=1e-12)
    assert g_bound(DISC, [0.4], [0.4]) == 0.0
    assert g_bound(BALL, [0, 0], [0.5, 0]) == pytest.approx(0.6035533905932737, rel=1e-12)


def test_f_g_symmetry():
    rng = np.random.default_rng(0)
    for _ in range(50):
        z, w = sample_pair_near(DISC, None, 0.02, 0.9, seed=int(rng.integers(1 << 30)))
        assert f_bound(DISC, z, w) == pytest.approx(f_bound(DISC, w, z), rel=1e-13)
        assert g_bound(DISC, z, w) == pytest.approx(g_bound(DISC, w, z), rel=1e-13)


def test_fit_constant_arithmetic():
    fit = fit_constant([(1.0, 2.0), (0.5, 1.0)], form="difference")
    assert fit.constant == pytest.approx(0.5)
    fit2 = fit_constant([(2.0, 1.0)], form="difference")
    assert fit2.constant == pytest.approx(2.0)
    fit3 = fit_constant([(3.0, 1.0)], form="ratio")
    assert fit3.constant == pytest.approx(2.0)
    below = fit_constant([(s * 0.9, s) for s in (0.1, 0.5, 2.0)], form="difference")
    assert below.constant <= 1.0


def test_fit_constant_unboundable_guard():
    fit = fit_constant([(1.0, 0.0), (1.0, 2.0)], form="difference")
    assert fit.unboundable == 1
    assert fit.constant == pytest.approx(0.5)


def test_theorem_global_ball_consistency():
    pairs = [sample_pair_near(BALL, None, 0.1, 0.5, seed=s) for s in range(8)]
    tangents = [Tangent(pairs[i][0], [1.0, 0.3j]) for i in range(4)]
    reports = check_theorem_global(BALL, pairs, tangents, CFG, seed=0)
    ratio = reports["ratio"]
    # Lempert equality on convex domains: the ratio sits at 1 up to bracket
    for row in ratio.rows:
        lo, _ = (None, None)
        assert row.lhs >= 1.0 - 1e-12
        assert row.lhs <= 1.0 + 1e-4 / 0.1  # tiny bracket over c >= atanh of separation
    assert math.isfinite(ratio.constant)
    assert reports["gap"].constant < 1e-2
    assert math.isfinite(reports["metric"].constant)
    assert "weak_constant" in reports["metric"].extras


def test_verify_classical_ball_polydisc():
    reports = {}
    for D, seeds in [(BALL, range(10)), (POLY, range(10, 20))]:
        pairs = [sample_pair_near(D, None, 0.05, 0.7, seed=s) for s in seeds]
        tangents = [Tangent(pairs[0][0], np.array([0.5, 1.0]))]
        reports[D.kind] = verify_classical(D, pairs, tangents, CFG, seed=0)
    for kind, reps in reports.items():
        assert reps["log_lower"].extras["min_margin"] >= -1e-9
        assert reps["gap_sqrt"].constant < 1.0  # convex: gap is bracket noise
        assert math.isfinite(reps["visibility_lower"].constant)
        assert math.isfinite(reps["lempert_log_upper"].constant)


def test_classical_dini_constant_on_disc():
    pairs = [sample_pair_near(DISC, None, 0.02, 0.8, seed=s) for s in range(200)]
    reports = verify_classical(DISC, pairs, [], CFG, seed=0)
    dini = reports["log_upper"]
    assert dini.constant >= 0.5
    assert dini.stability <= 2.0


def test_localization_ball_runs():
    setup = LocalizationSetup(
        domain=BALL,
        boundary_point=[1.0, 0.0],
        window=Window(center=[1.0, 0.0], r_outer=0.5, r_inner=0.25),
        cfg=SolverConfig(restarts=2, maxiter=40, path_nodes=4, node_moves=False),
    )
    pairs = []
    s = 0
    while len(pairs) < 5 and s < 400:
        z, w = sample_pair_near(BALL, [1.0, 0.0], 0.02, 0.1, seed=s)
        s += 1
        if setup.inner_contains(z) and setup.inner_contains(w):
            pairs.append((z, w))
    tangents = [Tangent(pairs[0][0], [1.0, 0.5]), Tangent(pairs[1][0], [0.2, 1.0])]
    reports = check_localization(setup, pairs, tangents, seed=0)
    for key in ("ratio", "gap", "sqrt_gap", "metric", "metric_linear"):
        assert math.isfinite(reports[key].constant)
        assert reports[key].rows or reports[key].dropped
    # localized distance dominates the global one
    for row in reports["sqrt_gap"].rows:
        assert row.lhs >= -1e-6


def test_localization_real_disc_pairs_reverse_ratio():
    setup = LocalizationSetup(
        domain=DISC,
        boundary_point=[1.0],
        window=Window(center=[1.0], r_outer=0.5, r_inner=0.25),
        cfg=SolverConfig(restarts=2, maxiter=40, path_nodes=4, node_moves=False),
    )
    pairs = []
    for a, b in [(0.80, 0.90), (0.84, 0.93), (0.86, 0.95), (0.78, 0.88)]:
        z, w = np.array([a + 0j]), np.array([b + 0j])
        assert setup.inner_contains(z) and setup.inner_contains(w)
        pairs.append((z, w))
    reports = check_localization(setup, pairs, [], seed=0)
    rr = reports["gap"].extras.get("real_pair_reverse_min_ratio")
    assert rr is not None and rr > 0.0
    assert reports["gap"].extras["real_pair_count"] == 4


def test_localization_rejects_pair_outside_window():
    setup = LocalizationSetup(
        domain=BALL,
        boundary_point=[1.0, 0.0],
        window=Window(center=[1.0, 0.0], r_outer=0.5, r_inner=0.25),
    )
    from invmet.errors import SetupError

    with pytest.raises(SetupError):
        check_localization(setup, [(np.array([0.0, 0.0]), np.array([0.1, 0.0]))])
