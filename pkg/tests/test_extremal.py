import math

import numpy as np
import pytest

from invmet.closed_forms import model_distance, model_metric, poincare_distance
from invmet.domains import (
    Annulus,
    Ball,
    ComplexEllipsoid,
    HalfPlane,
    Intersection,
    Polydisc,
    Tangent,
    UnitDisc,
    sample_pair_near,
)
from invmet.extremal import (
    SolverConfig,
    _abs2_onesided,
    _trig_eval,
    _trig_max,
    _winding_number,
    caratheodory_lower,
    caratheodory_metric_lower,
    certified_sup_margin,
    constant_disc,
    kobayashi_distance_upper,
    kobayashi_metric_upper,
    largest_certified_radius,
    lempert_upper,
    sandwich,
)

DISC = UnitDisc()
BALL = Ball(center=[0, 0], radius=1.0)
POLY = Polydisc([1.0, 1.0])
ANN = Annulus(0.3)
CFG = SolverConfig(restarts=4, maxiter=60)


# ---------------------------------------------------------------------------
# certification machinery
# ---------------------------------------------------------------------------


def test_trig_max_against_dense_grid():
    rng = np.random.default_rng(0)
    for _ in range(30):
        deg = rng.integers(1, 20)
        t = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
        t[0] = t[0].real
        grid = np.linspace(0, 2 * np.pi, 200_001)
        dense = float(np.max(_trig_eval(t, grid)))
        got = _trig_max(t)
        assert got >= dense - 1e-9
        assert got <= dense + 1e-6


def test_abs2_onesided_matches_direct():
    rng = np.random.default_rng(1)
    a = rng.normal(size=6) + 1j * rng.normal(size=6)
    t = _abs2_onesided(a)
    th = np.linspace(0, 2 * np.pi, 1001)
    direct = np.abs(np.sum(a[None, :] * np.exp(1j * np.outer(th, np.arange(6))), axis=1)) ** 2
    assert np.allclose(_trig_eval(t, th), direct, atol=1e-10)


@pytest.mark.parametrize(
    "D",
    [DISC, BALL, POLY, ComplexEllipsoid([1.0, 2.0]), ANN, HalfPlane([1.0, 0.0], 0.5)],
    ids=lambda d: d.kind,
)
def test_certified_margin_dominates_grid(D):
    rng = np.random.default_rng(2)
    n = D.dimension
    for _ in range(10):
        coeffs = 0.3 * (rng.normal(size=(5, n)) + 1j * rng.normal(size=(5, n)))
        rho = rng.uniform(0.5, 1.0)
        cert = certified_sup_margin(D, coeffs, rho)
        th = np.linspace(0, 2 * np.pi, 4096)
        pts = np.stack([np.polyval(coeffs[::-1, j], rho * np.exp(1j * th)) for j in range(n)], axis=-1)
        grid = float(np.max(D.margin(pts)))
        assert cert >= grid - 1e-9


def test_winding_number():
    ident = np.array([0.0, 1.0], dtype=complex)
    assert _winding_number(ident, 0.9) == 1
    shifted = np.array([0.5, 0.1], dtype=complex)
    assert _winding_number(shifted, 0.9) == 0


def test_certified_radius_shrinks_violating_disc():
    # identity disc scaled by 1.2 pokes out of the unit disc; certification
    # must shrink it below 1/1.2
    coeffs = np.array([[0.0], [1.2]], dtype=complex)
    rho = largest_certified_radius(DISC, coeffs, 0.1)
    assert rho is not None
    assert rho <= 1.0 / 1.2 + 1e-9
    assert certified_sup_margin(DISC, coeffs, rho) < 0


# ---------------------------------------------------------------------------
# Lempert upper bounds
# ---------------------------------------------------------------------------


def test_lempert_disc_examples():
    val, disc = lempert_upper(DISC, [0], [0.5], CFG)
    oracle = poincare_distance(0, 0.5)
    assert oracle - 1e-12 <= val <= oracle + 1e-3
    assert np.allclose(disc(0.0), [0.0], atol=1e-12)
    assert np.allclose(disc(math.tanh(val)), [0.5], atol=1e-9)


def test_lempert_disc_far_pair():
    val, _ = lempert_upper(DISC, [0.9], [-0.9], CFG)
    oracle = poincare_distance(0.9, -0.9)
    assert oracle - 1e-12 <= val <= oracle + 1e-3


def test_lempert_ball_slice():
    val, disc = lempert_upper(BALL, [0, 0], [0.5, 0], CFG)
    assert abs(val - 0.5493061443340549) <= 1e-3
    assert np.allclose(disc(0.0), [0, 0], atol=1e-12)


def test_lempert_trivial_pair():
    val, disc = lempert_upper(DISC, [0.3], [0.3], CFG)
    assert val == 0.0
    assert np.allclose(disc(0.7), [0.3])


def test_lempert_refuses_near_boundary():
    with pytest.raises(ValueError):
        lempert_upper(DISC, [1 - 1e-6], [0.0], CFG)


def test_lempert_soundness_random_pairs():
    for i, D in enumerate([DISC, BALL, POLY]):
        for j in range(4):
            z, w = sample_pair_near(D, None, 0.08, 0.8, seed=100 * i + j)
            val, _ = lempert_upper(D, z, w, CFG)
            assert val >= model_distance(D, z, w) - 1e-10


def test_lempert_annulus_upper_bounds_covering():
    for seed in range(3):
        z, w = sample_pair_near(ANN, None, 0.08, 0.3, seed=seed)
        val, disc = lempert_upper(ANN, z, w, CFG)
        k = model_distance(ANN, z, w)
        assert val >= k - 1e-10
        assert np.allclose(disc(0.0), z, atol=1e-8)
        assert np.allclose(disc(math.tanh(val)), w, atol=1e-7)


def test_lempert_monotone_under_inclusion():
    inter = Intersection(base=BALL, window=Ball(center=[1.0, 0], radius=0.8))
    z = np.array([0.55 + 0.0j, 0.05 + 0.05j])
    w = np.array([0.75 + 0.0j, -0.04 + 0.0j])
    assert inter.contains(z) and inter.contains(w)
    big, _ = lempert_upper(BALL, z, w, CFG)
    small, _ = lempert_upper(inter, z, w, CFG)
    assert small >= big - 1e-6


def test_degree_stability_on_oracles():
    z, w = sample_pair_near(DISC, None, 0.1, 0.6, seed=5)
    v8, _ = lempert_upper(DISC, z, w, SolverConfig(degree=8, restarts=3, maxiter=60))
    v16, _ = lempert_upper(DISC, z, w, SolverConfig(degree=16, restarts=3, maxiter=60))
    assert abs(v8 - v16) <= 1e-6
    zb, wb = sample_pair_near(BALL, None, 0.1, 0.6, seed=6)
    b8, _ = lempert_upper(BALL, zb, wb, SolverConfig(degree=8, restarts=3, maxiter=60))
    b16, _ = lempert_upper(BALL, zb, wb, SolverConfig(degree=16, restarts=3, maxiter=60))
    assert abs(b8 - b16) <= 1e-6


# ---------------------------------------------------------------------------
# Caratheodory lower bounds
# ---------------------------------------------------------------------------


def test_caratheodory_exact_families():
    assert caratheodory_lower(DISC, [0], [0.5])[0] == pytest.approx(0.5493061443340549, abs=1e-13)
    val, f = caratheodory_lower(POLY, [0, 0], [0.3, 0.7])
    assert val == pytest.approx(0.8673005276940531, abs=1e-13)
    assert abs(f(np.array([0.3, 0.7]))) == pytest.approx(math.tanh(val), abs=1e-13)
    vb, fb = caratheodory_lower(BALL, [0.3, 0.2j], [0.5, 0.1])
    assert vb == pytest.approx(model_distance(BALL, [0.3, 0.2j], [0.5, 0.1]), abs=1e-12)
    assert abs(fb(np.array([0.3, 0.2j]))) < 1e-12
    hp = HalfPlane([1.0], 0.0)
    assert caratheodory_lower(hp, [-1], [-2])[0] == pytest.approx(model_distance(hp, [-1], [-2]), abs=1e-12)


def test_caratheodory_functional_admissible():
    rng = np.random.default_rng(4)
    for D, pair_seed in [(BALL, 1), (ANN, 2), (ComplexEllipsoid([1.0, 2.0]), 3)]:
        z, w = sample_pair_near(D, None, 0.1, 0.5, seed=pair_seed)
        val, f = caratheodory_lower(D, z, w, CFG)
        pts = D.sample_interior(400, rng)
        sup = float(np.max(np.abs(f(pts))))
        assert sup <= 1.0 + 1e-9
        assert abs(complex(np.asarray(f(z[None, :])).ravel()[0])) < 1e-9
        assert val <= model_distance(D, z, w) + 1e-9 if D.has_closed_form else True


def test_caratheodory_trivial():
    val, f = caratheodory_lower(DISC, [0.2], [0.2])
    assert val == 0.0


def test_caratheodory_metric_examples():
    assert caratheodory_metric_lower(DISC, Tangent([0], [1]))[0] == pytest.approx(1.0)
    assert caratheodory_metric_lower(POLY, Tangent([0, 0], [0, 2]))[0] == pytest.approx(2.0)
    assert caratheodory_metric_lower(DISC, Tangent([0.3], [0]))[0] == 0.0
    t = Tangent([0.3, 0.2j], [0.5, -1.0])
    val, f = caratheodory_metric_lower(BALL, t)
    assert val == pytest.approx(model_metric(BALL, t), abs=1e-12)
    # numerical derivative of the functional matches the reported value
    h = 1e-6
    xhat = t.direction / np.linalg.norm(t.direction)
    fd = (f(t.base + h * xhat) - f(t.base - h * xhat)) / (2 * h)
    assert abs(fd) * np.linalg.norm(t.direction) == pytest.approx(val, rel=1e-5)


# ---------------------------------------------------------------------------
# Kobayashi metric and distance
# ---------------------------------------------------------------------------


def test_metric_upper_examples():
    val, _ = kobayashi_metric_upper(DISC, Tangent([0], [1]), CFG)
    assert 1.0 - 1e-12 <= val <= 1.0 + 1e-3
    val2, _ = kobayashi_metric_upper(DISC, Tangent([0.5], [1]), CFG)
    assert 4 / 3 - 1e-12 <= val2 <= 4 / 3 + 2e-3
    val3, _ = kobayashi_metric_upper(BALL, Tangent([0, 0], [1, 0]), CFG)
    assert 1.0 - 1e-12 <= val3 <= 1.0 + 1e-3


def test_metric_upper_homogeneity():
    t1 = Tangent([0.2, 0.1j], [0.7, -0.3])
    lam = 3.7
    t2 = Tangent([0.2, 0.1j], [lam * 0.7, -lam * 0.3])
    v1, _ = kobayashi_metric_upper(BALL, t1, CFG)
    v2, _ = kobayashi_metric_upper(BALL, t2, CFG)
    assert v2 == pytest.approx(lam * v1, rel=1e-9)


def test_metric_zero_direction():
    val, disc = kobayashi_metric_upper(DISC, Tangent([0.2], [0]), CFG)
    assert val == 0.0


def test_metric_soundness():
    for D, seed in [(DISC, 0), (BALL, 1), (POLY, 2), (ANN, 3)]:
        rng = np.random.default_rng(seed)
        z = D.sample_interior(1, rng)[0]
        if D.boundary_distance(z) < 1e-3:
            continue
        X = rng.normal(size=2 * D.dimension).view(np.complex128)
        t = Tangent(z, X)
        val, _ = kobayashi_metric_upper(D, t, CFG)
        assert val >= model_metric(D, t) - 1e-9


def test_kobayashi_distance_upper_disc():
    kb = kobayashi_distance_upper(DISC, [0], [0.5], CFG)
    oracle = poincare_distance(0, 0.5)
    assert abs(kb.value - oracle) <= 5e-3
    assert kb.error_estimate < 1e-2


def test_kobayashi_distance_upper_annulus():
    cfg = SolverConfig(path_nodes=32, node_moves=False)
    kb = kobayashi_distance_upper(ANN, [-0.6], [0.6], cfg)
    oracle = model_distance(ANN, [-0.6], [0.6])
    assert abs(kb.value - oracle) <= 1e-2


def test_kobayashi_distance_trivial():
    kb = kobayashi_distance_upper(DISC, [0.4], [0.4], CFG)
    assert kb.value == 0.0


def test_distance_chain_small():
    models = [(DISC, 0.08, 0.8), (BALL, 0.08, 0.8), (POLY, 0.08, 0.8), (ANN, 0.08, 0.3)]
    for i, (D, dmin, dmax) in enumerate(models):
        z, w = sample_pair_near(D, None, dmin, dmax, seed=50 + i)
        lo, _ = caratheodory_lower(D, z, w, CFG)
        up, _ = lempert_upper(D, z, w, CFG)
        k = model_distance(D, z, w)
        assert lo <= k + 1e-9
        assert k <= up + 1e-9


def test_sandwich_bracket():
    z, w = sample_pair_near(BALL, None, 0.1, 0.6, seed=17)
    br = sandwich(BALL, z, w, CFG)
    assert br.lower <= br.upper + 1e-9
    assert br.width <= 1e-2
    assert br.meta["disc"].degree >= 1


def test_annulus_sandwich_width_positive():
    br = sandwich(ANN, [-0.6], [0.6], CFG)
    assert br.width > 0.5  # Caratheodory strictly below the covering distance


def test_solver_config_json_round_trip():
    cfg = SolverConfig(degree=6, boundary_samples=96, restarts=3, tol=1e-5, seed=9)
    back = SolverConfig.from_json(cfg.to_json())
    assert back.degree == 6 and back.boundary_samples == 96
    assert back.restarts == 3 and back.tol == 1e-5 and back.seed == 9


def test_analytic_disc_json():
    disc = constant_disc([0.3, 0.1j])
    obj = disc.to_json()
    assert obj["scale"] == 1.0
    val, d2 = lempert_upper(DISC, [0], [0.5], CFG)
    j = d2.to_json()
    assert len(j["coefficients"]) == d2.degree + 1
