"""Exact invariant distances and metrics on the closed-form model domains.

All distances are returned in the tanh-inverse (half-log) scale and are
computed through log1p-style formulas, so values stay accurate when the
arguments approach the boundary.  These functions are the ground truth for
every solver test in the package.
"""

from __future__ import annotations

import math

import numpy as np

from .domains import Annulus, Ball, Domain, HalfPlane, Polydisc, Tangent, UnitDisc, as_point, herm
from .errors import CapabilityError, OutsideDomainError


def atanh_stable(t: float) -> float:
    """tanh^{-1} t = 0.5 log((1+t)/(1-t)), accurate as t -> 1^-."""
    if t < 0 or t >= 1:
        raise ValueError(f"atanh argument must lie in [0, 1), got {t}")
    return 0.5 * math.log1p(2 * t / (1 - t))


def disc_mobius(a: complex, zeta) -> np.ndarray:
    """Disc automorphism (zeta + a) / (1 + conj(a) zeta), vectorized in zeta."""
    zeta = np.asarray(zeta, dtype=np.complex128)
    return (zeta + a) / (1.0 + np.conj(a) * zeta)


def poincare_distance(z: complex, w: complex) -> float:
    m = abs(z - w) / abs(1.0 - np.conj(z) * w)
    return atanh_stable(m)


def poincare_metric(z: complex, X: complex) -> float:
    return abs(X) / (1.0 - abs(z) ** 2)


def ball_mobius(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Automorphism of the unit ball sending a to 0, applied to w."""
    a = np.asarray(a, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    na2 = float(np.sum(np.abs(a) ** 2))
    if na2 == 0.0:
        return -w
    s = math.sqrt(1.0 - na2)
    proj = (np.sum(w * np.conj(a)) / na2) * a
    return (a - proj - s * (w - proj)) / (1.0 - np.sum(w * np.conj(a)))


def _unit_ball_distance(z: np.ndarray, w: np.ndarray) -> float:
    q = (
        (1.0 - float(np.sum(np.abs(z) ** 2)))
        * (1.0 - float(np.sum(np.abs(w) ** 2)))
        / abs(1.0 - herm(z, w)) ** 2
    )
    q = min(q, 1.0)
    m = math.sqrt(1.0 - q)
    if m >= 1.0:
        raise OutsideDomainError("points must be interior to the ball")
    # atanh(m) with the cancellation-free 1 - m^2 = q form
    return math.log1p(m) - 0.5 * math.log(q)


def _unit_ball_metric(z: np.ndarray, X: np.ndarray) -> float:
    s2 = float(np.sum(np.abs(z) ** 2))
    num = (1.0 - s2) * float(np.sum(np.abs(X) ** 2)) + abs(herm(X, z)) ** 2
    return math.sqrt(num) / (1.0 - s2)


# ---------------------------------------------------------------------------
# annulus: hyperbolic distance through the exponential covering of a band
# ---------------------------------------------------------------------------


def _annulus_lift(z: complex, r: float) -> complex:
    """Map a point of {r<|z|<1} to the strip {0 < Im w < pi}."""
    L = -math.log(r)
    omega = cmath_log(z)
    return 1j * math.pi * (omega - math.log(r)) / L


def cmath_log(z: complex) -> complex:
    return complex(math.log(abs(z)), math.atan2(z.imag, z.real))


def _strip_distance(w1: complex, w2: complex) -> float:
    # in the strip {0 < Im < pi} the half-log-scale distance has the stable
    # closed form acosh-type expression; exponentiate carefully
    a, b = np.exp(w1), np.exp(w2)  # upper half-plane
    m = abs(a - b) / abs(a - np.conj(b))
    if m >= 1.0:
        # overflow of far apart lifts: the true distance exceeds any
        # representable candidate, so report it as such
        return math.inf
    return atanh_stable(m)


def annulus_distance(z: complex, w: complex, r: float, max_decks: int = 256) -> float:
    """Distance on {r < |z| < 1}: minimum of lifted strip distances.

    Deck transformations shift the strip coordinate by multiples of
    2 pi^2 / log(1/r); the enumeration stops once the shift alone forces a
    candidate above the current best (strip density >= 1/2), so the result
    carries no truncation error.
    """
    L = -math.log(r)
    w1 = _annulus_lift(z, r)
    w2 = _annulus_lift(w, r)
    shift = 2.0 * math.pi**2 / L
    base_gap = abs((w1 - w2).real)
    best = math.inf
    for k in range(max_decks):
        signs = (k, -k) if k else (0,)
        done = True
        for s in signs:
            lower = 0.5 * (abs(s) * shift - base_gap)
            if lower > best:
                continue
            done = False
            cand = _strip_distance(w1, w2 - s * shift)
            best = min(best, cand)
        if k and done:
            break
    return best


def annulus_metric_density(z: complex, r: float) -> float:
    """Density of the covering metric at z (multiply by |X|)."""
    L = -math.log(r)
    y = math.pi * (math.log(abs(z)) - math.log(r)) / L
    return math.pi / (2.0 * L * abs(z) * math.sin(y))


def annulus_geodesic(z: complex, w: complex, r: float, t: np.ndarray) -> np.ndarray:
    """Points of the distance-realizing curve, t in [0,1] (not arc length)."""
    L = -math.log(r)
    w1 = _annulus_lift(z, r)
    w2 = _annulus_lift(w, r)
    shift = 2.0 * math.pi**2 / L
    best, bk = math.inf, 0
    kmax = int(abs((w1 - w2).real) / shift) + 3
    for k in range(-kmax, kmax + 1):
        cand = _strip_distance(w1, w2 - k * shift)
        if cand < best:
            best, bk = cand, k
    a, b = np.exp(w1), np.exp(w2 - bk * shift)
    # geodesic of the upper half-plane between a and b, then push down
    pts_h = _halfplane_geodesic_points(a, b, t)
    w_path = np.log(pts_h)
    omega = math.log(r) + w_path * L / (1j * math.pi)
    return np.exp(omega)


def _halfplane_geodesic_points(a: complex, b: complex, t: np.ndarray) -> np.ndarray:
    """Upper half-plane geodesic from a to b sampled at parameters t in [0,1]."""
    if abs(a.real - b.real) < 1e-14 * (abs(a) + abs(b)):
        heights = np.exp((1 - t) * math.log(a.imag) + t * math.log(b.imag))
        return a.real + 1j * heights
    # circle orthogonal to the real axis through a and b
    c = (abs(b) ** 2 - abs(a) ** 2) / (2 * (b.real - a.real))
    R = abs(a - c)
    th1 = math.atan2(a.imag, a.real - c)
    th2 = math.atan2(b.imag, b.real - c)
    th = (1 - t) * th1 + t * th2
    return c + R * np.exp(1j * th)


# ---------------------------------------------------------------------------
# model dispatch
# ---------------------------------------------------------------------------


def _require_interior(D: Domain, z: np.ndarray):
    if not D.contains(z):
        raise OutsideDomainError(f"point is not interior to {D.kind}")


def model_distance(D: Domain, z, w) -> float:
    """Invariant distance on a closed-form model, tanh-inverse scale.

    On the convex models this single value is simultaneously the
    Caratheodory distance, the Kobayashi distance and the Lempert function;
    on the annulus it is the Kobayashi distance (covering metric).
    """
    if not D.has_closed_form:
        raise CapabilityError(f"no closed-form distance for kind {D.kind}")
    z = as_point(z, D.dimension)
    w = as_point(w, D.dimension)
    _require_interior(D, z)
    _require_interior(D, w)
    if np.array_equal(z, w):
        return 0.0
    if isinstance(D, UnitDisc):
        return poincare_distance(complex(z[0]), complex(w[0]))
    if isinstance(D, Ball):
        return _unit_ball_distance((z - D.center) / D.radius, (w - D.center) / D.radius)
    if isinstance(D, Polydisc):
        return max(
            poincare_distance(complex(a) / r, complex(b) / r)
            for a, b, r in zip(z, w, D.radii)
        )
    if isinstance(D, HalfPlane):
        a = D.offset - herm(z, D.normal)
        b = D.offset - herm(w, D.normal)
        m = abs(a - b) / abs(a + np.conj(b))
        return atanh_stable(m)
    if isinstance(D, Annulus):
        return annulus_distance(complex(z[0]), complex(w[0]), D.inner_radius)
    raise CapabilityError(f"no closed-form distance for kind {D.kind}")


def model_metric(D: Domain, t: Tangent) -> float:
    """Infinitesimal invariant metric on a closed-form model."""
    if not D.has_closed_form:
        raise CapabilityError(f"no closed-form metric for kind {D.kind}")
    z = as_point(t.base, D.dimension)
    X = as_point(t.direction, D.dimension)
    _require_interior(D, z)
    if isinstance(D, UnitDisc):
        return poincare_metric(complex(z[0]), complex(X[0]))
    if isinstance(D, Ball):
        return _unit_ball_metric((z - D.center) / D.radius, X / D.radius)
    if isinstance(D, Polydisc):
        return max(
            poincare_metric(complex(a) / r, complex(x) / r)
            for a, x, r in zip(z, X, D.radii)
        )
    if isinstance(D, HalfPlane):
        return abs(herm(X, D.normal)) / (2.0 * D._delta(z))
    if isinstance(D, Annulus):
        return annulus_metric_density(complex(z[0]), D.inner_radius) * abs(complex(X[0]))
    raise CapabilityError(f"no closed-form metric for kind {D.kind}")


def disc_gromov_lower(zeta, eta) -> float:
    """log(1 + |zeta-eta| / (2 sqrt(delta(zeta) delta(eta)))) on the unit disc.

    A lower bound for the Poincare distance between the two points.
    """
    zeta = complex(np.asarray(zeta, dtype=np.complex128).reshape(()))
    eta = complex(np.asarray(eta, dtype=np.complex128).reshape(()))
    dz, de = 1.0 - abs(zeta), 1.0 - abs(eta)
    if dz <= 0 or de <= 0:
        raise OutsideDomainError("both points must be interior to the unit disc")
    return math.log1p(abs(zeta - eta) / (2.0 * math.sqrt(dz * de)))
