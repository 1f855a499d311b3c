import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invmet.closed_forms import (
    annulus_distance,
    annulus_geodesic,
    annulus_metric_density,
    atanh_stable,
    ball_mobius,
    disc_gromov_lower,
    disc_mobius,
    model_distance,
    model_metric,
    poincare_distance,
)
from invmet.domains import Annulus, Ball, HalfPlane, Polydisc, Tangent, UnitDisc
from invmet.errors import CapabilityError, OutsideDomainError

DISC = UnitDisc()
BALL = Ball(center=[0, 0], radius=1.0)
POLY = Polydisc([1.0, 1.0])
ANN = Annulus(0.3)
HALF = HalfPlane([1.0], 0.0)


def test_frozen_examples():
    assert model_distance(DISC, [0], [0.5]) == pytest.approx(0.5493061443340549, abs=1e-12)
    assert model_distance(POLY, [0, 0], [0.3, 0.7]) == pytest.approx(0.8673005276940531, abs=1e-12)
    assert model_distance(BALL, [0, 0], [0.5, 0]) == pytest.approx(0.5493061443340549, abs=1e-12)
    assert model_distance(DISC, [0.25], [0.25]) == 0.0
    assert model_metric(DISC, Tangent([0], [1])) == pytest.approx(1.0)
    assert model_metric(DISC, Tangent([0.5], [1])) == pytest.approx(4.0 / 3.0, abs=1e-12)
    assert model_metric(BALL, Tangent([0, 0], [0, 1])) == pytest.approx(1.0)


def test_exterior_point_rejected():
    with pytest.raises(OutsideDomainError):
        model_distance(DISC, [0], [1.2])
    with pytest.raises(CapabilityError):
        from invmet.domains import ComplexEllipsoid

        model_distance(ComplexEllipsoid([1.0, 2.0]), [0, 0], [0.1, 0.1])


@pytest.mark.parametrize("D, tol", [(DISC, 1e-12), (BALL, 1e-12), (POLY, 1e-12), (ANN, 1e-8), (HALF, 1e-12)])
def test_symmetry_and_triangle(D, tol):
    rng = np.random.default_rng(42)
    pts = D.sample_interior(60, rng)
    trips = rng.integers(0, len(pts), size=(1000, 3))
    for i, j, k in trips:
        a, b, c = pts[i], pts[j], pts[k]
        dab = model_distance(D, a, b)
        assert dab == pytest.approx(model_distance(D, b, a), abs=tol)
        assert dab <= model_distance(D, a, c) + model_distance(D, c, b) + tol


def test_disc_mobius_invariance():
    rng = np.random.default_rng(5)
    for _ in range(200):
        z, w = (rng.uniform(-0.95, 0.95) + 1j * rng.uniform(-0.95, 0.95) for _ in range(2))
        if abs(z) >= 1 or abs(w) >= 1:
            continue
        a = 0.8 * (rng.uniform(-1, 1) + 1j * rng.uniform(-1, 1)) / 2
        phi = rng.uniform(0, 2 * np.pi)
        mz = complex(disc_mobius(a, np.exp(1j * phi) * z))
        mw = complex(disc_mobius(a, np.exp(1j * phi) * w))
        assert poincare_distance(mz, mw) == pytest.approx(poincare_distance(z, w), abs=1e-12)


def test_ball_automorphism_invariance():
    rng = np.random.default_rng(6)
    for _ in range(100):
        z = 0.6 * rng.normal(size=4).view(np.complex128)
        w = 0.6 * rng.normal(size=4).view(np.complex128)
        a = 0.5 * rng.normal(size=4).view(np.complex128)
        if max(np.linalg.norm(z), np.linalg.norm(w), np.linalg.norm(a)) >= 0.95:
            continue
        lhs = model_distance(BALL, ball_mobius(a, z), ball_mobius(a, w))
        assert lhs == pytest.approx(model_distance(BALL, z, w), abs=1e-11)


def test_polydisc_product_property():
    rng = np.random.default_rng(7)
    pts = POLY.sample_interior(80, rng)
    for i in range(0, 78, 2):
        z, w = pts[i], pts[i + 1]
        coord = max(poincare_distance(complex(z[j]), complex(w[j])) for j in range(2))
        assert model_distance(POLY, z, w) == pytest.approx(coord, abs=1e-13)


def test_halfplane_matches_cayley_transform():
    # map {Re u < 0} to the unit disc by u -> (1+u)/(1-u)
    rng = np.random.default_rng(8)
    for _ in range(100):
        u = -rng.exponential(1.0) + 1j * rng.normal()
        v = -rng.exponential(1.0) + 1j * rng.normal()
        disc_img = poincare_distance((1 + u) / (1 - u), (1 + v) / (1 - v))
        assert model_distance(HALF, [u], [v]) == pytest.approx(disc_img, abs=1e-11)


def test_annulus_distance_frozen_and_symmetric():
    val = annulus_distance(-0.6, 0.6, 0.3)
    assert val == pytest.approx(4.127312387332961, abs=1e-9)
    assert annulus_distance(0.6, -0.6, 0.3) == pytest.approx(val, abs=1e-9)
    assert annulus_distance(0.5, 0.5, 0.3) == 0.0


def test_annulus_distance_against_quadrature():
    # independent oracle: integrate the covering density along the
    # closed-form geodesic polyline
    for z, w in [(-0.6 + 0j, 0.6 + 0j), (0.5 + 0j, 0.8j), (0.4 + 0.1j, 0.35 - 0.2j)]:
        pts = annulus_geodesic(z, w, 0.3, np.linspace(0, 1, 40001))
        mids = 0.5 * (pts[1:] + pts[:-1])
        steps = np.abs(np.diff(pts))
        dens = np.array([annulus_metric_density(complex(m), 0.3) for m in mids])
        quad = float(np.sum(dens * steps))
        assert annulus_distance(z, w, 0.3) == pytest.approx(quad, abs=2e-5)


def test_annulus_monotone_in_inclusion():
    # the annulus sits inside the unit disc, so its distance dominates
    rng = np.random.default_rng(9)
    pts = ANN.sample_interior(40, rng)
    for i in range(0, 38, 2):
        z, w = complex(pts[i][0]), complex(pts[i + 1][0])
        assert annulus_distance(z, w, 0.3) >= poincare_distance(z, w) - 1e-12


def test_metric_integrates_to_distance_disc():
    # quadrature of the infinitesimal form along the radial geodesic
    r = 0.77
    ts = np.linspace(0, r, 200_001)
    dens = 1.0 / (1.0 - ts**2)
    integral = float(np.trapezoid(dens, ts))
    assert integral == pytest.approx(model_distance(DISC, [0], [r]), abs=1e-9)


def test_metric_integrates_to_distance_annulus_radial():
    r1, r2 = 0.45, 0.85
    ts = np.linspace(r1, r2, 200_001)
    dens = np.array([annulus_metric_density(t, 0.3) for t in ts])
    integral = float(np.trapezoid(dens, ts))
    assert integral == pytest.approx(annulus_distance(r1, r2, 0.3), abs=1e-8)


def test_disc_gromov_lower_frozen():
    assert disc_gromov_lower(0, 0) == 0.0
    assert disc_gromov_lower(0, 0.5) == pytest.approx(0.30273327561360797, abs=1e-12)
    assert disc_gromov_lower(0.9, -0.9) == pytest.approx(math.log(10.0), abs=1e-12)
    assert poincare_distance(0.9, -0.9) == pytest.approx(2.9444389791664416, abs=1e-12)
    assert disc_gromov_lower(0.9, -0.9) <= poincare_distance(0.9, -0.9)


def test_disc_gromov_lower_is_lower_bound():
    rng = np.random.default_rng(11)
    pts = DISC.sample_interior(2000, rng)[:, 0]
    for i in range(0, 1998, 2):
        z, w = complex(pts[i]), complex(pts[i + 1])
        assert disc_gromov_lower(z, w) <= poincare_distance(z, w) + 1e-12


@given(st.floats(min_value=1e-12, max_value=1 - 1e-12))
@settings(max_examples=200, deadline=None)
def test_atanh_stable_matches_numpy(t):
    assert atanh_stable(t) == pytest.approx(float(np.arctanh(t)), rel=1e-13, abs=1e-300)


def test_atanh_stable_domain():
    with pytest.raises(ValueError):
        atanh_stable(1.0)
    with pytest.raises(ValueError):
        atanh_stable(-0.1)
