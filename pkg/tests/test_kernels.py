import numpy as np
import pytest

from invmet import _kernels
from invmet.domains import (
    Annulus,
    Ball,
    ComplexEllipsoid,
    HalfPlane,
    Intersection,
    Polydisc,
    UnitDisc,
)

DOMAINS = [
    UnitDisc(),
    Ball(center=[0.1, 0.2j], radius=1.3),
    Polydisc([1.0, 0.7]),
    ComplexEllipsoid([1.0, 2.0]),
    Annulus(0.3),
    HalfPlane([1.0, 0.5j], 0.3),
    Intersection(base=Ball(center=[0, 0], radius=1.0), window=Ball(center=[1.0, 0], radius=0.6)),
]


def _batch(n, B=9, K=7, seed=0):
    rng = np.random.default_rng(seed)
    return 0.4 * (rng.normal(size=(B, K, n)) + 1j * rng.normal(size=(B, K, n)))


def test_eval_disc_batch_matches_polyval():
    coeffs = _batch(2)
    zetas = np.exp(2j * np.pi * np.arange(33) / 33)
    got = _kernels.eval_disc_batch(coeffs, zetas)
    for b in range(coeffs.shape[0]):
        for j in range(2):
            want = np.polyval(coeffs[b, ::-1, j], zetas)
            assert np.allclose(got[b, :, j], want, atol=1e-13)


@pytest.mark.parametrize("D", DOMAINS, ids=lambda d: d.kind)
def test_margin_sign_matches_contains(D):
    rng = np.random.default_rng(3)
    inside = D.sample_interior(30, rng)
    margins = _kernels.margin_points(*D.kernel_atoms(), inside)
    assert np.all(margins < 0)
    if D.kind != "half_plane":
        outside = inside + 100.0
        assert np.all(_kernels.margin_points(*D.kernel_atoms(), outside) > 0)


@pytest.mark.parametrize("D", DOMAINS, ids=lambda d: d.kind)
def test_backends_agree(D):
    backs = _kernels.backends()
    if "cython" not in backs:
        pytest.skip("compiled kernel not built")
    n = D.dimension
    coeffs = _batch(n)
    zetas = 0.999 * np.exp(2j * np.pi * np.arange(64) / 64)
    atoms = D.kernel_atoms()
    p_np = backs["numpy"].penalty_batch(coeffs, zetas, *atoms)
    p_cy = backs["cython"].penalty_batch(coeffs, zetas, *atoms)
    assert np.allclose(p_np, p_cy, rtol=1e-9, atol=1e-9)
    pts = _batch(n, B=4, K=3, seed=5).reshape(-1, n)
    m_np = backs["numpy"].margin_points(*atoms, pts)
    m_cy = backs["cython"].margin_points(*atoms, pts)
    assert np.allclose(m_np, m_cy, rtol=1e-9, atol=1e-9)


def test_backend_name_known():
    assert _kernels.backend_name() in ("numpy", "cython")
