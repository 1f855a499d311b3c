"""Extremal-problem solvers for the invariant distances and metrics.

Upper bounds come from analytic discs: a polynomial map is optimized
together with two free interpolation nodes in the unit disc, the incidence
conditions are eliminated exactly (linearly) and containment is enforced by
a penalty on boundary samples.  A candidate is only reported after an
a-posteriori certification: the squared coordinate moduli on a circle are
trigonometric polynomials, so their extrema are computed from the roots of
the derivative and the disc is shrunk radially until the certified margin
is negative.  Reported upper bounds are therefore sound up to that
root-finding accuracy even when the optimizer has not converged.

Lower bounds come from certified holomorphic functionals into the unit
disc: exact extremal families on the disc, ball, polydisc and half-plane,
supporting half-plane projections on other convex domains, and sup-norm
certified Laurent polynomials on the annulus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .closed_forms import annulus_geodesic, atanh_stable, ball_mobius, poincare_distance
from .domains import (
    Annulus,
    Ball,
    ComplexEllipsoid,
    Domain,
    HalfPlane,
    Intersection,
    Polydisc,
    Tangent,
    UnitDisc,
    as_point,
    ellipsoid_support,
    herm,
)
from .errors import CapabilityError, SolverFailure, TopologyError

_NODE_GUARD = 1e-13


def _boundary_clearance_ok(D: Domain, z: np.ndarray, thresh: float) -> bool:
    """Cheap sufficient check that dist(z, boundary) >= thresh.

    For every kind except the ellipsoid the margin is exactly minus the
    boundary distance; the ellipsoid margin is in defining-function units
    and gets a Lipschitz factor before falling back to the exact solve.
    """
    m = float(D.margin(z[None, :])[0])
    if m >= 0:
        return False
    if isinstance(D, ComplexEllipsoid):
        lip = 2.0 * float(np.sum(D.exponents)) * 1.2
        if -m / lip >= thresh:
            return True
        return D.boundary_distance(z) >= thresh
    return -m >= thresh


@dataclass(frozen=True)
class SolverConfig:
    """Shared configuration for the disc and functional solvers."""

    degree: int = 8
    boundary_samples: int = 128
    restarts: int = 8
    tol: float = 1e-6
    seed: int = 0
    penalty: tuple = (1e4, 1e7)
    maxiter: int = 80
    fd_step: float = 1e-6
    min_boundary_distance: float = 1e-4
    path_nodes: int = 8
    node_moves: bool = True

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "boundary_samples": self.boundary_samples,
            "restarts": self.restarts,
            "tol": self.tol,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SolverConfig":
        known = {f for f in cls.__dataclass_fields__}
        kw = {k: v for k, v in obj.items() if k in known}
        if "penalty" in kw:
            kw["penalty"] = tuple(kw["penalty"])
        return cls(**kw)


DEFAULT_CONFIG = SolverConfig()


# ---------------------------------------------------------------------------
# analytic discs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnalyticDisc:
    """phi(zeta) = g(scale * mobius_center(rotation * zeta)) with g polynomial.

    The automorphism premap puts the disc into the normal form phi(0) = base
    point, phi(alpha) = target with alpha > 0, without leaving the class of
    maps whose containment can be certified algebraically.  Discs produced
    by the annulus solver carry ``exp_wrap``: they live in the covering band
    and are composed with exp, which preserves both properties.
    """

    coeffs: np.ndarray  # (K, n) complex coefficients of g
    center: complex = 0.0  # premap Mobius parameter, |center| < 1
    rotation: complex = 1.0  # premap rotation, |rotation| = 1
    scale: float = 1.0  # certified radius of the polynomial disc
    boundary_samples: int = 0
    exp_wrap: bool = False

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.atleast_2d(np.asarray(self.coeffs, dtype=np.complex128)))

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def dimension(self) -> int:
        return self.coeffs.shape[1]

    def premap(self, zeta):
        zeta = np.asarray(zeta, dtype=np.complex128)
        u = self.rotation * zeta
        return self.scale * (u + self.center) / (1.0 + np.conj(self.center) * u)

    def _poly(self, u):
        out = np.full(np.shape(u) + (self.dimension,), self.coeffs[-1], dtype=np.complex128)
        for k in range(self.degree - 1, -1, -1):
            out = out * u[..., None] + self.coeffs[k]
        return out

    def __call__(self, zeta):
        out = self._poly(self.premap(zeta))
        return np.exp(out) if self.exp_wrap else out

    def derivative(self, zeta):
        zeta = np.asarray(zeta, dtype=np.complex128)
        u = self.premap(zeta)
        dpoly = np.zeros(np.shape(u) + (self.dimension,), dtype=np.complex128)
        for k in range(self.degree, 0, -1):
            dpoly = dpoly * u[..., None] + k * self.coeffs[k]
        w = self.rotation * zeta
        dpre = self.scale * self.rotation * (1.0 - abs(self.center) ** 2) / (1.0 + np.conj(self.center) * w) ** 2
        out = dpoly * dpre[..., None]
        if self.exp_wrap:
            out = out * np.exp(self._poly(u))
        return out

    def to_json(self) -> dict:
        return {
            "coefficients": [[[float(c.real), float(c.imag)] for c in row] for row in self.coeffs],
            "center": [self.center.real, self.center.imag],
            "rotation": [self.rotation.real, self.rotation.imag],
            "scale": self.scale,
            "boundary_samples": self.boundary_samples,
            "exp_wrap": self.exp_wrap,
        }


class _Band(Domain):
    """Internal solver domain: the vertical band {log r < Re w < 0}.

    The exponential maps it onto the annulus, so Lempert/metric solves on
    the annulus run here, where the domain is convex.
    """

    kind = "band"
    dimension = 1
    is_convex = True
    has_closed_form = False

    def __init__(self, inner_radius: float):
        self.log_r = math.log(inner_radius)

    def kernel_atoms(self):
        codes = np.array([_kernels.HALFPLANE, _kernels.HALFPLANE], dtype=np.int32)
        fidx = np.array([0, 1, 2], dtype=np.int64)
        fpar = np.array([0.0, -self.log_r], dtype=np.float64)
        cidx = np.array([0, 1, 2], dtype=np.int64)
        cpar = np.array([1.0, -1.0], dtype=np.complex128)
        return codes, fidx, fpar, cidx, cpar

    def _delta(self, z):
        x = float(np.real(z[0]))
        return min(-x, x - self.log_r)

    def _dir_radius(self, z, v):
        return self._delta(z)

    def basepoint(self):
        return np.array([0.5 * self.log_r], dtype=np.complex128)


def constant_disc(z) -> AnalyticDisc:
    z = as_point(z)
    return AnalyticDisc(coeffs=z[None, :])


@dataclass(frozen=True)
class ScalarFunctional:
    """A certified holomorphic map D -> unit disc vanishing at the base point."""

    kind: str
    params: dict

    def __call__(self, u):
        u = np.asarray(u, dtype=np.complex128)
        p = self.params
        if self.kind == "zero":
            return np.zeros(u.shape[:-1], dtype=np.complex128)
        if self.kind == "disc_mobius":
            return (u[..., 0] - p["a"]) / (1.0 - np.conj(p["a"]) * u[..., 0])
        if self.kind == "laurent_mobius_inv":
            x = p["r"] / u[..., 0]
            return (x - p["a"]) / (1.0 - np.conj(p["a"]) * x)
        if self.kind == "coordinate_mobius":
            x = u[..., p["j"]] / p["r"]
            return (x - p["a"]) / (1.0 - np.conj(p["a"]) * x)
        if self.kind == "ball_functional":
            x = (u - p["center"]) / p["radius"]
            if x.ndim == 1:
                return np.sum(ball_mobius(p["a"], x) * np.conj(p["eta"]))
            return np.array([np.sum(ball_mobius(p["a"], xi) * np.conj(p["eta"])) for xi in x])
        if self.kind == "halfplane_map":
            a = p["offset"] - u @ np.conj(p["normal"])
            z0 = p["z0"]
            return (a - z0) / (a + np.conj(z0))
        if self.kind == "support_halfplane":
            a = p["support"] - u @ p["a"]
            z0 = p["z0"]
            return (a - z0) / (a + np.conj(z0))
        if self.kind == "laurent":
            ks = np.arange(-p["n_neg"], p["n_pos"] + 1)
            vals = np.tensordot(u[..., 0][..., None] ** ks, p["coeffs"], axes=([-1], [0]))
            return vals / p["sup_norm"]
        raise ValueError(f"unknown functional kind {self.kind}")

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        for k, v in self.params.items():
            if isinstance(v, np.ndarray):
                out[k] = [[float(np.real(c)), float(np.imag(c))] for c in v]
            elif isinstance(v, complex):
                out[k] = [v.real, v.imag]
            else:
                out[k] = v
        return out


@dataclass(frozen=True)
class Bracket:
    """Certified two-sided bracket [lower, upper] for a distance value."""

    lower: float
    upper: float
    meta: dict = field(default_factory=dict)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)


# ---------------------------------------------------------------------------
# trigonometric certification of containment
# ---------------------------------------------------------------------------


def _abs2_onesided(a: np.ndarray) -> np.ndarray:
    """One-sided spectrum of |sum a_k e^{ik t}|^2: t_d = sum_k a_k conj(a_{k-d})."""
    K = a.size
    return np.array([np.sum(a[d:] * np.conj(a[: K - d])) for d in range(K)])


def _trig_eval(t: np.ndarray, theta: np.ndarray) -> np.ndarray:
    vals = np.full(theta.shape, float(np.real(t[0])))
    for d in range(1, t.size):
        vals += 2.0 * np.real(t[d] * np.exp(1j * d * theta))
    return vals


def _trig_max(t: np.ndarray) -> float:
    """Certified max of t0 + 2 Re sum t_d e^{i d theta}.

    Moderate degrees use the roots of the derivative (near machine
    accuracy); high degrees fall back to a dense grid inflated by the
    derivative bound, which is conservative in the safe direction.
    """
    t = np.asarray(t, dtype=np.complex128)
    D = t.size - 1
    while D > 0 and abs(t[D]) == 0.0:
        D -= 1
    t = t[: D + 1]
    if D == 0:
        return float(np.real(t[0]))
    if D > 64:
        M = max(4096, 32 * D)
        grid = np.linspace(0.0, 2 * np.pi, M, endpoint=False)
        spec = np.zeros(M, dtype=np.complex128)
        spec[: D + 1] = t
        spec[0] = t[0]
        vals = np.real(np.fft.ifft(spec)) * M  # t0 + sum t_d e^{idθ}, real part doubled below
        vals = 2 * vals - float(np.real(t[0]))
        deriv_bound = 2.0 * float(np.sum(np.arange(D + 1) * np.abs(t)))
        return float(np.max(vals)) + math.pi / M * deriv_bound
    grid = np.linspace(0.0, 2 * np.pi, 256, endpoint=False)
    best = float(np.max(_trig_eval(t, grid)))
    p = np.zeros(2 * D + 1, dtype=np.complex128)
    for d in range(1, D + 1):
        p[D + d] += d * t[d]
        p[D - d] -= d * np.conj(t[d])
    scale = np.max(np.abs(p))
    if scale > 0:
        roots = np.roots((p / scale)[::-1])
        on_circle = roots[np.abs(np.abs(roots) - 1.0) < 1e-4]
        if on_circle.size:
            best = max(best, float(np.max(_trig_eval(t, np.angle(on_circle)))))
    return best


def _trig_min(t: np.ndarray) -> float:
    return -_trig_max(-np.asarray(t, dtype=np.complex128))


def _circle_coeffs(coeffs: np.ndarray, rho: float) -> np.ndarray:
    K = coeffs.shape[0]
    return coeffs * (rho ** np.arange(K))[:, None]


def _poly_sup_deriv(coeffs_col: np.ndarray, rho: float) -> float:
    k = np.arange(coeffs_col.size)
    return float(np.sum(k * np.abs(coeffs_col) * rho ** np.maximum(k - 1, 0)))


def _winding_number(coeffs_col: np.ndarray, rho: float) -> Optional[int]:
    """Winding of the circle image around 0; None when 0 is (nearly) hit."""
    M = 2048
    th = np.linspace(0.0, 2 * np.pi, M, endpoint=False)
    u = rho * np.exp(1j * th)
    vals = np.polyval(coeffs_col[::-1], u)
    if np.min(np.abs(vals)) < 1e-14:
        return None
    ph = np.unwrap(np.angle(vals))
    if np.max(np.abs(np.diff(ph))) > 2.5:
        return None
    closing = float(np.angle(vals[0] / vals[-1]))
    return int(np.round((ph[-1] - ph[0] + closing) / (2 * np.pi)))


def certified_sup_margin(D: Domain, coeffs: np.ndarray, rho: float) -> float:
    """Upper bound for the violation margin of g over the closed disc of radius rho.

    Negative return certifies that the polynomial disc stays inside D.
    All coordinate margins reduce to extrema of trigonometric polynomials on
    the circle (the margins are subharmonic, so the circle suffices); the
    annulus additionally requires a zero-free certificate for the inner
    constraint.
    """
    if isinstance(D, UnitDisc):
        a = _circle_coeffs(coeffs, rho)[:, 0]
        return math.sqrt(max(_trig_max(_abs2_onesided(a)), 0.0)) - 1.0
    if isinstance(D, Ball):
        shifted = coeffs.copy()
        shifted[0] = shifted[0] - D.center
        cs = _circle_coeffs(shifted, rho)
        t = sum(_abs2_onesided(cs[:, j]) for j in range(cs.shape[1]))
        return math.sqrt(max(_trig_max(t), 0.0)) - D.radius
    if isinstance(D, Polydisc):
        cs = _circle_coeffs(coeffs, rho)
        return max(
            math.sqrt(max(_trig_max(_abs2_onesided(cs[:, j])), 0.0)) - D.radii[j]
            for j in range(cs.shape[1])
        )
    if isinstance(D, HalfPlane):
        b = coeffs @ np.conj(D.normal)
        t = 0.5 * b * rho ** np.arange(b.size)
        t[0] = complex(np.real(b[0]), 0.0)
        return _trig_max(t) - D.offset
    if isinstance(D, Annulus):
        a = _circle_coeffs(coeffs, rho)[:, 0]
        t = _abs2_onesided(a)
        outer = math.sqrt(max(_trig_max(t), 0.0)) - 1.0
        min2 = _trig_min(t)
        if min2 <= 0.0:
            return max(outer, D.inner_radius)
        inner = D.inner_radius - math.sqrt(min2)
        w = _winding_number(coeffs[:, 0], rho)
        if w is None or w != 0:
            return math.inf
        return max(outer, inner)
    if isinstance(D, ComplexEllipsoid):
        m = D.exponents
        if np.allclose(m, np.round(m)):
            cs = _circle_coeffs(coeffs, rho)
            total = None
            for j in range(cs.shape[1]):
                t1 = _abs2_onesided(cs[:, j])
                full = _onesided_to_full(t1)
                powered = full
                for _ in range(int(round(m[j])) - 1):
                    powered = np.convolve(powered, full)
                half = _full_to_onesided(powered)
                total = half if total is None else _add_onesided(total, half)
            return _trig_max(total) - 1.0
        # non-integer exponents: dense grid plus a Lipschitz inflation
        M = 4096
        th = np.linspace(0.0, 2 * np.pi, M, endpoint=False)
        pts = np.stack(
            [np.polyval(coeffs[::-1, j], rho * np.exp(1j * th)) for j in range(coeffs.shape[1])],
            axis=-1,
        )
        vals = np.sum(np.abs(pts) ** (2 * m), axis=-1) - 1.0
        lip = sum(
            2 * m[j] * (np.max(np.abs(pts[:, j])) + 0.1) ** (2 * m[j] - 1) * _poly_sup_deriv(coeffs[:, j], rho)
            for j in range(coeffs.shape[1])
        )
        return float(np.max(vals)) + math.pi * rho * lip / M
    if isinstance(D, _Band):
        b = coeffs[:, 0]
        t = 0.5 * b * rho ** np.arange(b.size)
        t[0] = complex(np.real(b[0]), 0.0)
        return max(_trig_max(t), D.log_r - _trig_min(t))
    if isinstance(D, Intersection):
        return max(
            certified_sup_margin(D.base, coeffs, rho),
            certified_sup_margin(D.window, coeffs, rho),
        )
    raise CapabilityError(f"no containment certificate for kind {D.kind}")


def _onesided_to_full(t: np.ndarray) -> np.ndarray:
    D = t.size - 1
    full = np.zeros(2 * D + 1, dtype=np.complex128)
    full[D] = t[0]
    for d in range(1, D + 1):
        full[D + d] = t[d]
        full[D - d] = np.conj(t[d])
    return full


def _full_to_onesided(full: np.ndarray) -> np.ndarray:
    D = (full.size - 1) // 2
    return full[D:]


def _add_onesided(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.size < b.size:
        a, b = b, a
    out = a.copy()
    out[: b.size] += b
    return out


def largest_certified_radius(D: Domain, coeffs: np.ndarray, inner_need: float) -> Optional[float]:
    """Largest rho with a certified negative margin, or None.

    The margin is nondecreasing in rho by subharmonicity, so a bisection
    between the required inner radius and 1 finds the usable disc size.
    """
    lo = min(max(inner_need * (1 + 1e-12) + 1e-12, 1e-6), 1.0 - 1e-12)
    hi = 1.0 - 1e-9
    if hi <= lo:
        hi = min(1.0 - 1e-12, lo * (1 + 1e-12) + 1e-13)
    if certified_sup_margin(D, coeffs, hi) < 0.0:
        return hi
    if certified_sup_margin(D, coeffs, lo) >= 0.0:
        return None
    for _ in range(60):
        if hi - lo < 1e-12:
            break
        mid = 0.5 * (lo + hi)
        if certified_sup_margin(D, coeffs, mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# shared optimizer machinery
# ---------------------------------------------------------------------------


def _squash(y: np.ndarray) -> np.ndarray:
    """R^2 -> open unit disc, diffeomorphic and smooth at the origin."""
    zeta = y[..., 0] + 1j * y[..., 1]
    return zeta / np.sqrt(1.0 + np.abs(zeta) ** 2)


def _unsquash(zeta: complex) -> np.ndarray:
    r = abs(zeta)
    if r >= 1.0:
        zeta = zeta / r * (1 - 1e-9)
        r = abs(zeta)
    y = zeta / math.sqrt(1.0 - r * r)
    return np.array([y.real, y.imag])


def _atanh_batch(m: np.ndarray) -> np.ndarray:
    m = np.clip(m, 0.0, 1.0 - 1e-15)
    return 0.5 * np.log1p(2 * m / (1 - m))


def _make_fun_grad(batch_obj, fd_step: float):
    def fg(x):
        P = x.size
        steps = fd_step * (1.0 + np.abs(x))
        X = np.tile(x, (2 * P + 1, 1))
        idx = np.arange(P)
        X[1 + 2 * idx, idx] += steps
        X[2 + 2 * idx, idx] -= steps
        vals = batch_obj(X)
        return vals[0], (vals[1::2] - vals[2::2]) / (2 * steps)

    return fg


def _descend(batch_obj, x0: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    x = np.asarray(x0, dtype=np.float64)
    fg = _make_fun_grad(batch_obj, cfg.fd_step)
    res = minimize(
        fg,
        x,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": cfg.maxiter, "ftol": 1e-15, "gtol": 1e-12},
    )
    return res.x


_SAMPLE_RHO = 1.0 - 1e-6


def _unit_circle(M: int) -> np.ndarray:
    return _SAMPLE_RHO * np.exp(2j * np.pi * np.arange(M) / M)


# ---------------------------------------------------------------------------
# Lempert function upper bound
# ---------------------------------------------------------------------------


def _decode_lempert(x: np.ndarray, degree: int, n: int, z: np.ndarray, w: np.ndarray):
    """Free parameters -> (hyperbolic node distance, full coefficient batch)."""
    B = x.shape[0]
    z1 = _squash(x[:, 0:2])
    z2 = _squash(x[:, 2:4])
    nfree = degree - 1
    if nfree > 0:
        raw = x[:, 4:].reshape(B, nfree, n, 2)
        chi = raw[..., 0] + 1j * raw[..., 1]
    else:
        chi = np.zeros((B, 0, n), dtype=np.complex128)
    ks = np.arange(2, degree + 1)
    p1 = z1[:, None] ** ks[None, :]
    p2 = z2[:, None] ** ks[None, :]
    S1 = np.einsum("bkn,bk->bn", chi, p1)
    S2 = np.einsum("bkn,bk->bn", chi, p2)
    dnode = z2 - z1
    bad = np.abs(dnode) < _NODE_GUARD
    dnode_safe = np.where(bad, 1.0, dnode)
    c1 = ((w - z)[None, :] - (S2 - S1)) / dnode_safe[:, None]
    c0 = z[None, :] - c1 * z1[:, None] - S1
    coeffs = np.concatenate([c0[:, None, :], c1[:, None, :], chi], axis=1)
    m = np.abs(dnode) / np.abs(1.0 - np.conj(z1) * z2)
    value = _atanh_batch(m)
    value = np.where(bad, 1e9, value)
    return value, coeffs, z1, z2


def _lempert_batch_objective(D: Domain, z, w, degree, M, pen):
    atoms = D.kernel_atoms()
    zetas = _unit_circle(M)
    n = z.size

    def batch(x):
        value, coeffs, _, _ = _decode_lempert(x, degree, n, z, w)
        return value + pen * _kernels.penalty_batch(
            np.ascontiguousarray(coeffs), zetas, *atoms
        )

    return batch


def _affine_start(D: Domain, z, w, degree, n):
    mid = 0.5 * (z + w)
    sep = float(np.linalg.norm(w - z))
    if not D.contains(mid):
        return None
    v = (w - z) / sep
    R = 0.95 * D.directional_radius(mid, v)
    if not np.isfinite(R) or R <= 0:
        return None
    t = sep / (2.0 * R)
    if t >= 0.92:
        return None
    x0 = np.zeros(4 + 2 * n * (degree - 1))
    x0[0:2] = _unsquash(complex(-t))
    x0[2:4] = _unsquash(complex(t))
    return x0


def _slice_start(D: Domain, z, w, n):
    """Degree-1 start matching the known extremal geometry where one exists.

    The free nodes absorb all boundary-hugging behavior, so on the disc and
    the ball this start is already the exact extremal disc.
    """
    if isinstance(D, UnitDisc):
        x0 = np.zeros(4)
        x0[0:2] = _unsquash(complex(z[0]))
        x0[2:4] = _unsquash(complex(w[0]))
        return x0
    if isinstance(D, Ball):
        sep = float(np.linalg.norm(w - z))
        v = (w - z) / sep
        d = z - D.center
        z0 = -herm(d, v)
        rho2 = D.radius**2 - float(np.linalg.norm(d)) ** 2 + abs(z0) ** 2
        rho = math.sqrt(max(rho2, 0.0))
        if rho <= 0:
            return None
        nz = (0.0 - z0) / rho
        nw = (sep - z0) / rho
        if max(abs(nz), abs(nw)) >= 1.0 - 1e-12:
            return None
        x0 = np.zeros(4)
        x0[0:2] = _unsquash(complex(nz))
        x0[2:4] = _unsquash(complex(nw))
        return x0
    if isinstance(D, Polydisc):
        vals = [
            poincare_distance(complex(a) / r, complex(b) / r)
            for a, b, r in zip(z, w, D.radii)
        ]
        j = int(np.argmax(vals))
        x0 = np.zeros(4)
        x0[0:2] = _unsquash(complex(z[j]) / D.radii[j])
        x0[2:4] = _unsquash(complex(w[j]) / D.radii[j])
        return x0
    if isinstance(D, Intersection):
        return _slice_start(D.base, z, w, n)
    return None


def _polydisc_mobius_start(D: Polydisc, z, w, degree):
    """Full-degree polydisc start: driving coordinate is the scaled identity,
    passenger coordinates are Taylor expansions of their Mobius interpolants."""
    vals = [
        poincare_distance(complex(a) / r, complex(b) / r) for a, b, r in zip(z, w, D.radii)
    ]
    j = int(np.argmax(vals))
    nz = complex(z[j]) / D.radii[j]
    nw = complex(w[j]) / D.radii[j]
    mu = (nw - nz) / (1 - np.conj(nz) * nw)
    if abs(mu) < 1e-14:
        return None
    n = D.dimension
    M = 256
    zs = 0.95 * np.exp(2j * np.pi * np.arange(M) / M)
    cols = np.empty((degree + 1, n), dtype=np.complex128)
    for k in range(n):
        if k == j:
            cols[:, k] = 0.0
            cols[1, k] = D.radii[k]
            continue
        c = complex(z[k]) / D.radii[k]
        nu = (complex(w[k]) / D.radii[k] - c) / (1 - np.conj(c) * (complex(w[k]) / D.radii[k]))
        lam = nu / mu
        x = lam * (zs - nz) / (1 - np.conj(nz) * zs)
        f = D.radii[k] * (x + c) / (1 + np.conj(c) * x)
        spec = np.fft.fft(f) / M
        ks = np.arange(degree + 1)
        cols[:, k] = spec[: degree + 1] / (0.95**ks)
    x0 = np.zeros(4 + 2 * n * (degree - 1))
    x0[0:2] = _unsquash(nz)
    x0[2:4] = _unsquash(nw)
    x0[4:] = np.stack([cols[2:].real, cols[2:].imag], axis=-1).ravel()
    return x0


def _curve_start(D: Domain, z, w, degree, n, beta=0.7):
    if degree < 2:
        return None
    anchor = D.basepoint()
    x0 = np.zeros(4 + 2 * n * (degree - 1))
    x0[0:2] = _unsquash(complex(-beta))
    x0[2:4] = _unsquash(complex(beta))
    c2 = (z + w - 2 * anchor) / (2 * beta * beta)
    x0[4 : 4 + 2 * n] = np.stack([c2.real, c2.imag], axis=-1).ravel()
    return x0


def _band_start(D: Annulus, z, w, degree):
    """Annulus start: affine disc in the covering band, pushed down by exp."""
    r = D.inner_radius
    L = -math.log(r)
    o1 = complex(np.log(complex(z[0])))
    o2 = complex(np.log(complex(w[0])))
    shifts = 2j * np.pi * np.arange(-3, 4)
    o2 = complex(min((o2 + s for s in shifts), key=lambda o: abs(o - o1)))
    mid = 0.5 * (o1 + o2)
    half = 0.5 * abs(o2 - o1)
    if half < 1e-12:
        return None
    psi = (o2 - o1) / (2 * half)
    edge = min(mid.real - math.log(r), -mid.real)
    R = 4.0 * half if abs(psi.real) < 1e-9 else 0.95 * edge / abs(psi.real)
    R = max(R, 1.05 * half)
    t = half / R
    x0 = np.zeros(4 + 2 * (degree - 1))
    x0[0:2] = _unsquash(-t * 1.0)
    x0[2:4] = _unsquash(t * 1.0)
    direction = R * psi
    fac = np.exp(mid)
    ks = np.arange(0, degree + 1)
    coeffs = fac * direction**ks / np.array([math.factorial(int(k)) for k in ks])
    x0[4:] = np.stack([coeffs[2:].real, coeffs[2:].imag], axis=-1).ravel()
    return x0


def _lempert_start_list(D, z, w, cfg, rng, n):
    N = max(1, cfg.degree)
    entries = []
    s1 = _slice_start(D, z, w, n)
    if s1 is not None:
        entries.append((1, s1))
    if isinstance(D, Polydisc) and N >= 2:
        pm = _polydisc_mobius_start(D, z, w, N)
        if pm is not None:
            entries.append((N, pm))
    a1 = _affine_start(D, z, w, 1, n)
    if a1 is not None:
        entries.append((1, a1))
    if isinstance(D, Annulus):
        b = _band_start(D, z, w, max(N, 8))
        if b is not None:
            entries.append((max(N, 8), b))
    for d in sorted({min(2, N), N}):
        a = _affine_start(D, z, w, d, n)
        if a is not None:
            entries.append((d, a))
        c = _curve_start(D, z, w, d, n)
        if c is not None:
            entries.append((d, c))
    if not entries:
        # raw fallback: nodes at +-1/2, penalty descent does the rest
        x0 = np.zeros(4 + 2 * n * (N - 1))
        x0[0:2] = _unsquash(complex(-0.5))
        x0[2:4] = _unsquash(complex(0.5))
        entries.append((N, x0))
    base = [e for e in entries]
    while len(entries) < cfg.restarts and base:
        d, x0 = base[rng.integers(0, len(base))]
        jit = x0 + rng.normal(0, 0.25, x0.size)
        entries.append((d, jit))
    return entries[: max(cfg.restarts, 1)]


def _lempert_core(D: Domain, z, w, cfg: SolverConfig, starts):
    n = z.size
    best = None
    best_uncert = None

    def consider(x, degree):
        nonlocal best, best_uncert
        value, coeffs, z1, z2 = _decode_lempert(x[None, :], degree, n, z, w)
        g = coeffs[0]
        n1, n2 = complex(z1[0]), complex(z2[0])
        rho = largest_certified_radius(D, g, max(abs(n1), abs(n2)))
        if rho is None:
            raw = float(value[0])
            if best_uncert is None or raw < best_uncert[0]:
                best_uncert = (raw, g, n1, n2)
            return
        m = abs(n1 / rho - n2 / rho) / abs(1 - np.conj(n1 / rho) * (n2 / rho))
        if m >= 1.0:
            return
        val = atanh_stable(m)
        if best is None or val < best[0]:
            best = (val, g, n1, n2, rho)

    for degree, x0 in starts:
        consider(x0, degree)
        x = x0
        for pen in cfg.penalty:
            batch = _lempert_batch_objective(D, z, w, degree, cfg.boundary_samples, pen)
            x = _descend(batch, x, cfg)
        consider(x, degree)
    if best is None:
        raise SolverFailure("no containment-certified disc found", best_candidate=best_uncert)
    return best


def lempert_upper(D: Domain, z, w, cfg: Optional[SolverConfig] = None):
    """Certified upper bound for the Lempert function, with its disc.

    Returns (value, AnalyticDisc); the disc satisfies phi(0) = z exactly and
    phi(alpha) = w with alpha = tanh(value) > 0 on the positive real axis.
    """
    cfg = cfg or DEFAULT_CONFIG
    z = as_point(z, D.dimension)
    w = as_point(w, D.dimension)
    if np.array_equal(z, w):
        return 0.0, constant_disc(z)
    for pt in (z, w):
        if not _boundary_clearance_ok(D, pt, cfg.min_boundary_distance):
            raise ValueError(
                f"point too close to the boundary (< {cfg.min_boundary_distance}); "
                "tighten min_boundary_distance to override"
            )
    if isinstance(D, Annulus):
        return _lempert_upper_annulus(D, z, w, cfg)
    rng = np.random.default_rng(cfg.seed)
    starts = _lempert_start_list(D, z, w, cfg, rng, z.size)
    val, g, n1, n2, rho = _lempert_core(D, z, w, cfg, starts)
    disc = _normal_form_disc(g, n1, n2, rho, cfg.boundary_samples)
    return val, disc


def _sigma_band_coeffs(band: "_Band", center: complex, degree: int, lam: float = 0.95):
    scale = lam * (-band.log_r) / math.pi
    coef = np.zeros(degree + 1, dtype=np.complex128)
    coef[0] = center
    for k in range(1, degree + 1, 2):
        sigma = float(np.sinc(k / (degree + 1)))
        coef[k] = 1j * scale * 2.0 / k * sigma
    return coef, scale


def _poly_preimage(coef: np.ndarray, target: complex, guess: complex):
    """Newton solve poly(zeta) = target inside the unit disc."""
    dcoef = coef[1:] * np.arange(1, coef.size)
    z = guess
    for _ in range(80):
        f = complex(np.polyval(coef[::-1], z)) - target
        if abs(f) < 1e-13:
            break
        df = complex(np.polyval(dcoef[::-1], z))
        if abs(df) < 1e-300:
            return None
        z = z - f / df
        if abs(z) >= 1.0:
            z = z / abs(z) * (1 - 1e-9)
    if abs(complex(np.polyval(coef[::-1], z)) - target) > 1e-9:
        return None
    return z


def _band_sigma_start(band: "_Band", w1: complex, w2: complex, degree: int):
    """Smoothed truncation of the band uniformizer through the two lifts.

    The interpolation nodes are preimages under the smoothed polynomial
    itself, so the exact node elimination in the decoder leaves the start
    unperturbed.
    """
    center = 0.5 * band.log_r + 0.5j * (w1.imag + w2.imag)
    coef, scale = _sigma_band_coeffs(band, center, degree)
    nodes = []
    for w in (w1, w2):
        guess = complex(np.tanh((w - center) / (2j * scale)))
        nd = _poly_preimage(coef, w, guess)
        if nd is None or abs(nd) > 1 - 1e-9:
            return None
        nodes.append(nd)
    x0 = np.zeros(4 + 2 * (degree - 1))
    x0[0:2] = _unsquash(nodes[0])
    x0[2:4] = _unsquash(nodes[1])
    x0[4:] = np.stack([coef[2:].real, coef[2:].imag], axis=-1).ravel()
    return x0


def _best_lift(z: complex, w: complex):
    """Lift the pair to the covering band, picking the closest deck image."""
    o1 = complex(np.log(z))
    o2 = complex(np.log(w))
    best = None
    for k in range(-4, 5):
        cand = o2 + 2j * np.pi * k
        d = abs(cand - o1)
        if best is None or d < best[0]:
            best = (d, cand)
    return o1, best[1]


def _band_degree_for_reach(band: "_Band", o1: complex, o2: complex, lam: float) -> int:
    """Smallest odd-harmonic degree whose smoothed uniformizer reaches the lifts."""
    scale = lam * (-band.log_r) / math.pi
    center = 0.5 * band.log_r + 0.5j * (o1.imag + o2.imag)
    needed = max(abs(((o - center) / (1j * scale)).real) for o in (o1, o2)) + 0.8
    for N in range(5, 128, 2):
        reach = sum(2.0 * float(np.sinc(k / (N + 1))) / k for k in range(1, N + 1, 2))
        if reach >= needed:
            return N + 1
    return 128


def _lempert_upper_annulus(D: Annulus, z, w, cfg: SolverConfig):
    band = _Band(D.inner_radius)
    o1, o2 = _best_lift(complex(z[0]), complex(w[0]))
    zb = np.array([o1], dtype=np.complex128)
    wb = np.array([o2], dtype=np.complex128)
    rng = np.random.default_rng(cfg.seed)
    deg_auto = _band_degree_for_reach(band, o1, o2, 0.95)
    deg = max(cfg.degree, min(deg_auto, 128))
    starts = []
    s = _band_sigma_start(band, o1, o2, deg)
    if s is not None:
        starts.append((deg, s))
    a = _affine_start(band, zb, wb, 1, 1)
    if a is not None:
        starts.append((1, a))
    small = min(2, max(cfg.degree, 2))
    c = _curve_start(band, zb, wb, small, 1)
    if c is not None:
        mid_anchor = 0.5 * band.log_r + 0.5j * (o1.imag + o2.imag)
        c2 = (o1 + o2 - 2 * mid_anchor) / (2 * 0.7 * 0.7)
        c[4], c[5] = c2.real, c2.imag
        starts.append((small, c))
    if deg <= 32:
        base = list(starts)
        while len(starts) < cfg.restarts and base:
            d, x0 = base[rng.integers(0, len(base))]
            starts.append((d, x0 + rng.normal(0, 0.2, x0.size)))
        core_cfg = cfg
    else:
        # high-degree winding pair: the certified smoothed start carries the
        # value; keep one light polish pass only
        core_cfg = SolverConfig(
            degree=deg,
            boundary_samples=cfg.boundary_samples,
            restarts=1,
            tol=cfg.tol,
            seed=cfg.seed,
            penalty=(cfg.penalty[0],),
            maxiter=min(cfg.maxiter, 25),
            min_boundary_distance=cfg.min_boundary_distance,
        )
        starts = starts[:1] if s is not None else starts
    val, g, n1, n2, rho = _lempert_core(band, zb, wb, core_cfg, starts)
    disc = _normal_form_disc(g, n1, n2, rho, cfg.boundary_samples, exp_wrap=True)
    return val, disc


def _normal_form_disc(g, n1, n2, rho, M, exp_wrap=False) -> AnalyticDisc:
    a = n1 / rho
    target = (n2 / rho - a) / (1.0 - np.conj(a) * (n2 / rho))
    alpha = abs(target)
    omega = target / alpha if alpha > 0 else 1.0
    return AnalyticDisc(
        coeffs=g, center=a, rotation=omega, scale=rho, boundary_samples=M, exp_wrap=exp_wrap
    )


# ---------------------------------------------------------------------------
# Kobayashi metric upper bound
# ---------------------------------------------------------------------------


def _decode_metric(x, degree, n, z, xhat):
    B = x.shape[0]
    z0 = _squash(x[:, 0:2])
    s = x[:, 2] + 1j * x[:, 3]
    nfree = degree - 1
    if nfree > 0:
        raw = x[:, 4:].reshape(B, nfree, n, 2)
        chi = raw[..., 0] + 1j * raw[..., 1]
    else:
        chi = np.zeros((B, 0, n), dtype=np.complex128)
    ks = np.arange(2, degree + 1)
    pows = z0[:, None] ** ks[None, :]
    dpows = ks[None, :] * z0[:, None] ** (ks[None, :] - 1)
    c1 = s[:, None] * xhat[None, :] - np.einsum("bkn,bk->bn", chi, dpows)
    S1 = np.einsum("bkn,bk->bn", chi, pows)
    c0 = z[None, :] - c1 * z0[:, None] - S1
    coeffs = np.concatenate([c0[:, None, :], c1[:, None, :], chi], axis=1)
    conf = (1.0 - np.abs(z0) ** 2) * np.abs(s)
    value = -np.log(np.maximum(conf, 1e-300))
    return value, coeffs, z0, s


def _metric_slice_start(D: Domain, z, xhat):
    """Exact degree-1 start for the metric solve on slice-geodesic domains."""
    if isinstance(D, UnitDisc):
        x0 = np.zeros(4)
        x0[0:2] = _unsquash(complex(z[0]))
        sv = np.conj(complex(xhat[0]))
        x0[2], x0[3] = sv.real, sv.imag
        return x0
    if isinstance(D, Ball):
        d = z - D.center
        z0 = -herm(d, xhat)
        rho2 = D.radius**2 - float(np.linalg.norm(d)) ** 2 + abs(z0) ** 2
        if rho2 <= 0:
            return None
        rho = math.sqrt(rho2)
        node = -z0 / rho
        if abs(node) >= 1.0 - 1e-12:
            return None
        x0 = np.zeros(4)
        x0[0:2] = _unsquash(complex(node))
        x0[2] = rho
        return x0
    if isinstance(D, Polydisc):
        vals = np.abs(xhat) / (D.radii - np.abs(z) ** 2 / D.radii)
        j = int(np.argmax(vals))
        if abs(xhat[j]) < 1e-12:
            return None
        x0 = np.zeros(4)
        x0[0:2] = _unsquash(complex(z[j]) / D.radii[j])
        sv = D.radii[j] / complex(xhat[j])
        x0[2], x0[3] = sv.real, sv.imag
        return x0
    if isinstance(D, Intersection):
        return _metric_slice_start(D.base, z, xhat)
    return None


def _band_metric_start(band: "_Band", w0: complex, xhat: complex, degree: int):
    """Metric start in the band: smoothed uniformizer centered at the point."""
    center = 0.5 * band.log_r + 1j * w0.imag
    coef, scale = _sigma_band_coeffs(band, center, degree)
    guess = complex(np.tanh((w0 - center) / (2j * scale)))
    node = _poly_preimage(coef, w0, guess)
    if node is None or abs(node) > 1 - 1e-9:
        return None
    dg = complex(np.sum(np.arange(1, degree + 1) * coef[1:] * node ** np.arange(0, degree)))
    s = dg / xhat
    x0 = np.zeros(4 + 2 * (degree - 1))
    x0[0:2] = _unsquash(node)
    x0[2], x0[3] = s.real, s.imag
    x0[4:] = np.stack([coef[2:].real, coef[2:].imag], axis=-1).ravel()
    return x0


def kobayashi_metric_upper(D: Domain, t: Tangent, cfg: Optional[SolverConfig] = None):
    """Certified upper bound for the infinitesimal Kobayashi metric.

    Positively homogeneous in the direction by construction (the direction
    is normalized internally).  Returns (value, AnalyticDisc).
    """
    cfg = cfg or DEFAULT_CONFIG
    z = as_point(t.base, D.dimension)
    X = as_point(t.direction, D.dimension)
    nX = float(np.linalg.norm(X))
    if nX == 0.0:
        return 0.0, constant_disc(z)
    if not _boundary_clearance_ok(D, z, cfg.min_boundary_distance):
        raise ValueError("base point too close to the boundary")
    if isinstance(D, Annulus):
        zc, Xc = complex(z[0]), complex(X[0])
        band = _Band(D.inner_radius)
        zb = np.array([complex(np.log(zc))], dtype=np.complex128)
        val, disc = _metric_core_entry(band, zb, np.array([Xc / zc]), cfg, exp_wrap=True)
        return val, disc
    return _metric_core_entry(D, z, X, cfg)


def _metric_core_entry(D: Domain, z, X, cfg: SolverConfig, exp_wrap=False):
    nX = float(np.linalg.norm(X))
    xhat = X / nX
    rng = np.random.default_rng(cfg.seed)
    n = z.size
    atoms = D.kernel_atoms()
    zetas = _unit_circle(cfg.boundary_samples)

    def make_batch(degree, pen):
        def batch(x):
            value, coeffs, _, _ = _decode_metric(x, degree, n, z, xhat)
            return value + pen * _kernels.penalty_batch(np.ascontiguousarray(coeffs), zetas, *atoms)

        return batch

    R0 = 0.95 * D.directional_radius(z, xhat)
    if not np.isfinite(R0):
        R0 = 1e6
    starts = []
    ms = _metric_slice_start(D, z, xhat)
    if ms is not None:
        starts.append((1, ms))
    if isinstance(D, _Band):
        bs = _band_metric_start(D, complex(z[0]), complex(xhat[0]), max(cfg.degree, 12))
        if bs is not None:
            starts.append((max(cfg.degree, 12), bs))
    for d in sorted({1, min(2, cfg.degree), cfg.degree}):
        x0 = np.zeros(4 + 2 * n * (d - 1))
        x0[2] = R0
        starts.append((d, x0))
    while len(starts) < cfg.restarts:
        d = cfg.degree
        x0 = np.zeros(4 + 2 * n * (d - 1))
        x0[2] = R0
        x0 += rng.normal(0, 0.3, x0.size) * max(R0, 1.0) * 0.2
        starts.append((d, x0))
    best = None
    best_uncert = None

    def consider(x, degree):
        nonlocal best, best_uncert
        value, coeffs, z0, s = _decode_metric(x[None, :], degree, n, z, xhat)
        g = coeffs[0]
        node, sv = complex(z0[0]), complex(s[0])
        if abs(sv) < 1e-300:
            return
        rho = largest_certified_radius(D, g, abs(node))
        if rho is None:
            raw = math.exp(float(value[0]))
            if best_uncert is None or raw < best_uncert[0]:
                best_uncert = (raw, g, node, sv)
            return
        kappa_hat = rho / ((rho * rho - abs(node) ** 2) * abs(sv))
        if best is None or kappa_hat < best[0]:
            best = (kappa_hat, g, node, sv, rho)

    for degree, x0 in starts[: max(cfg.restarts, 1)]:
        consider(x0, degree)
        x = x0
        for pen in cfg.penalty:
            x = _descend(make_batch(degree, pen), x, cfg)
        consider(x, degree)
    if best is None:
        raise SolverFailure("no containment-certified metric disc", best_candidate=best_uncert)
    kappa_hat, g, node, sv, rho = best
    a = node / rho
    omega = np.conj(sv) / abs(sv)
    disc = AnalyticDisc(
        coeffs=g,
        center=a,
        rotation=omega,
        scale=rho,
        boundary_samples=cfg.boundary_samples,
        exp_wrap=exp_wrap,
    )
    return nX * kappa_hat, disc


# ---------------------------------------------------------------------------
# Caratheodory lower bounds
# ---------------------------------------------------------------------------


def _halfplane_value(sup: float, az: complex, aw: complex) -> float:
    """Distance between az and aw in {Re < sup}, tanh-inverse scale."""
    p, q = sup - az, sup - aw
    m = abs(p - q) / abs(p + np.conj(q))
    if m >= 1.0:
        return 0.0
    return atanh_stable(m)


def _support_functional_best(D, z, w=None, X=None, seed=0):
    """Optimize a supporting half-plane projection; returns (value, functional).

    With w given the objective is the induced distance lower bound; with X
    given it is the induced metric lower bound |lambda(X)| / (2 dist).
    """
    n = D.dimension
    m = D.exponents

    def value_of(avec):
        a = avec[:n] + 1j * avec[n:]
        na = np.linalg.norm(a)
        if na < 1e-12:
            return 0.0, None
        a = a / na
        sup = ellipsoid_support(m, np.abs(a))
        az = complex(np.sum(a * z))
        if w is not None:
            aw = complex(np.sum(a * w))
            return _halfplane_value(sup, az, aw), a
        lam = abs(complex(np.sum(a * X)))
        d = sup - az.real
        return lam / (2.0 * d), a

    rng = np.random.default_rng(seed)
    starts = []
    ref = (w - z) if w is not None else X
    if np.linalg.norm(ref) > 0:
        u = np.conj(ref) / np.linalg.norm(ref)
        starts.append(np.concatenate([u.real, u.imag]))
    for j in range(n):
        e = np.zeros(n, dtype=np.complex128)
        e[j] = 1.0
        starts.append(np.concatenate([e.real, e.imag]))
    for _ in range(4):
        starts.append(rng.normal(size=2 * n))
    best = (0.0, None)
    for s0 in starts:
        res = minimize(lambda v: -value_of(v)[0], s0, method="Nelder-Mead",
                       options={"maxiter": 400, "xatol": 1e-10, "fatol": 1e-12})
        val, a = value_of(res.x)
        if a is not None and val > best[0]:
            best = (val, a)
    val, a = best
    if a is None:
        return 0.0, None
    sup = ellipsoid_support(m, np.abs(a))
    func = ScalarFunctional(
        "support_halfplane",
        {"a": a, "support": sup, "z0": sup - complex(np.sum(a * z))},
    )
    return val, func


_LAURENT_GRID = np.exp(2j * np.pi * np.arange(128) / 128)


def _laurent_value(b, ks, z, w, r, certified=True):
    fz = np.sum(b * z**ks)
    b = b.copy()
    # enforce f(z) = 0 exactly by shifting the constant term
    b[ks == 0] -= fz
    fw = abs(np.sum(b * w**ks))
    sups = []
    for R in (r, 1.0):
        a = b * R ** ks.astype(float)
        if certified:
            sups.append(math.sqrt(max(_trig_max(_abs2_onesided_laurent(a, ks)), 1e-300)))
        else:
            vals = np.abs(_LAURENT_GRID[:, None] ** ks @ a)
            sups.append(float(np.max(vals)))
    S = max(sups)
    return fw, S, b


def _abs2_onesided_laurent(a: np.ndarray, ks: np.ndarray) -> np.ndarray:
    span = int(ks[-1] - ks[0])
    t = np.zeros(span + 1, dtype=np.complex128)
    for d in range(span + 1):
        acc = 0.0 + 0.0j
        for i, k in enumerate(ks):
            jj = np.searchsorted(ks, k - d)
            if jj < ks.size and ks[jj] == k - d:
                acc += a[i] * np.conj(a[jj])
        t[d] = acc
    return t


def _annulus_caratheodory(D: Annulus, z: complex, w: complex, cfg: SolverConfig):
    r = D.inner_radius
    cands = []
    cands.append((poincare_distance(z, w), ScalarFunctional("disc_mobius", {"a": z})))
    zi, wi = r / z, r / w
    val_inv = poincare_distance(zi, wi)
    cands.append((val_inv, ScalarFunctional("laurent_mobius_inv", {"a": zi, "r": r})))
    nneg = npos = max(4, cfg.degree)
    ks = np.arange(-nneg, npos + 1)

    def objective(v):
        b = v[: ks.size] + 1j * v[ks.size :]
        fw, S, _ = _laurent_value(b, ks, z, w, r, certified=False)
        if fw <= 0 or S <= 0:
            return 10.0
        return -(math.log(fw) - math.log(S))

    rng = np.random.default_rng(cfg.seed)
    best_l = None
    starts = []
    b0 = np.zeros(ks.size, dtype=np.complex128)
    b0[ks == 1] = 1.0
    b0[ks == 0] = -z
    starts.append(b0)
    b1 = np.zeros(ks.size, dtype=np.complex128)
    b1[ks == -1] = r
    b1[ks == 0] = -r / z
    starts.append(b1)
    starts.append(b0 + b1)
    starts.append(rng.normal(size=ks.size) + 1j * rng.normal(size=ks.size))
    for b_init in starts:
        v0 = np.concatenate([b_init.real, b_init.imag])
        res = minimize(objective, v0, method="Powell",
                       options={"maxiter": 6, "maxfev": 1200, "xtol": 1e-8, "ftol": 1e-10})
        b = res.x[: ks.size] + 1j * res.x[ks.size :]
        fw, S, bfix = _laurent_value(b, ks, z, w, r)
        if fw <= 0 or S <= 0:
            continue
        mval = fw / (S * (1 + 1e-12))
        if mval >= 1:
            continue
        val = atanh_stable(mval)
        if best_l is None or val > best_l[0]:
            best_l = (val, bfix, S)
    if best_l is not None:
        val, b, S = best_l
        cands.append(
            (val, ScalarFunctional("laurent", {"coeffs": b, "n_neg": nneg, "n_pos": npos, "sup_norm": S * (1 + 1e-12)}))
        )
    return max(cands, key=lambda c: c[0])


def caratheodory_lower(D: Domain, z, w, cfg: Optional[SolverConfig] = None):
    """Certified lower bound for the Caratheodory distance, with its functional.

    Exact (equal to the true distance) on the disc, polydisc, ball and
    half-plane, where the extremal functionals are classical.
    """
    cfg = cfg or DEFAULT_CONFIG
    z = as_point(z, D.dimension)
    w = as_point(w, D.dimension)
    if np.array_equal(z, w):
        return 0.0, ScalarFunctional("zero", {})
    if isinstance(D, UnitDisc):
        a = complex(z[0])
        return poincare_distance(a, complex(w[0])), ScalarFunctional("disc_mobius", {"a": a})
    if isinstance(D, Polydisc):
        vals = [
            poincare_distance(complex(a) / r, complex(b) / r)
            for a, b, r in zip(z, w, D.radii)
        ]
        j = int(np.argmax(vals))
        return vals[j], ScalarFunctional(
            "coordinate_mobius", {"j": j, "r": float(D.radii[j]), "a": complex(z[j]) / D.radii[j]}
        )
    if isinstance(D, Ball):
        zp = (z - D.center) / D.radius
        wp = (w - D.center) / D.radius
        img = ball_mobius(zp, wp)
        eta = img / np.linalg.norm(img)
        val = atanh_stable(float(np.linalg.norm(img)))
        return val, ScalarFunctional(
            "ball_functional", {"center": D.center, "radius": D.radius, "a": zp, "eta": eta}
        )
    if isinstance(D, HalfPlane):
        az = D.offset - herm(z, D.normal)
        aw = D.offset - herm(w, D.normal)
        m = abs(az - aw) / abs(az + np.conj(aw))
        val = atanh_stable(m) if m < 1 else 0.0
        return val, ScalarFunctional(
            "halfplane_map", {"normal": D.normal, "offset": D.offset, "z0": az}
        )
    if isinstance(D, ComplexEllipsoid):
        return _support_functional_best(D, z, w=w, seed=cfg.seed)
    if isinstance(D, Annulus):
        return _annulus_caratheodory(D, complex(z[0]), complex(w[0]), cfg)
    if isinstance(D, Intersection):
        cands = [caratheodory_lower(D.base, z, w, cfg)]
        if D.window.contains(z) and D.window.contains(w):
            cands.append(caratheodory_lower(D.window, z, w, cfg))
        return max(cands, key=lambda c: c[0])
    raise CapabilityError(f"no admissible functional family for {D.kind}")


def caratheodory_metric_lower(D: Domain, t: Tangent, cfg: Optional[SolverConfig] = None):
    """Certified lower bound for the Caratheodory metric, with its functional."""
    cfg = cfg or DEFAULT_CONFIG
    z = as_point(t.base, D.dimension)
    X = as_point(t.direction, D.dimension)
    if float(np.linalg.norm(X)) == 0.0:
        return 0.0, ScalarFunctional("zero", {})
    if isinstance(D, UnitDisc):
        a = complex(z[0])
        return abs(complex(X[0])) / (1 - abs(a) ** 2), ScalarFunctional("disc_mobius", {"a": a})
    if isinstance(D, Polydisc):
        vals = [
            (abs(complex(x)) / r) / (1 - abs(complex(a) / r) ** 2)
            for a, x, r in zip(z, X, D.radii)
        ]
        j = int(np.argmax(vals))
        return vals[j], ScalarFunctional(
            "coordinate_mobius", {"j": j, "r": float(D.radii[j]), "a": complex(z[j]) / D.radii[j]}
        )
    if isinstance(D, Ball):
        zp = (z - D.center) / D.radius
        Xp = X / D.radius
        s2 = float(np.sum(np.abs(zp) ** 2))
        val = math.sqrt((1 - s2) * float(np.sum(np.abs(Xp) ** 2)) + abs(herm(Xp, zp)) ** 2) / (1 - s2)
        # differential of the normalizing automorphism at its center
        proj = (herm(Xp, zp) / s2) * zp if s2 > 0 else np.zeros_like(Xp)
        dphi = -proj / (1 - s2) - (Xp - proj) / math.sqrt(1 - s2)
        eta = dphi / np.linalg.norm(dphi)
        return val, ScalarFunctional(
            "ball_functional", {"center": D.center, "radius": D.radius, "a": zp, "eta": eta}
        )
    if isinstance(D, HalfPlane):
        val = abs(herm(X, D.normal)) / (2.0 * D._delta(z))
        return val, ScalarFunctional(
            "halfplane_map", {"normal": D.normal, "offset": D.offset, "z0": D.offset - herm(z, D.normal)}
        )
    if isinstance(D, ComplexEllipsoid):
        return _support_functional_best(D, z, X=X, seed=cfg.seed)
    if isinstance(D, Annulus):
        zc, Xc = complex(z[0]), complex(X[0])
        r = D.inner_radius
        best = (abs(Xc) / (1 - abs(zc) ** 2), ScalarFunctional("disc_mobius", {"a": zc}))
        val_inv = abs(Xc) * (r / abs(zc) ** 2) / (1 - abs(r / zc) ** 2)
        if val_inv > best[0]:
            best = (val_inv, ScalarFunctional("laurent_mobius_inv", {"a": r / zc, "r": r}))
        lv = _annulus_metric_laurent(D, zc, Xc, cfg)
        if lv is not None and lv[0] > best[0]:
            best = lv
        return best
    if isinstance(D, Intersection):
        cands = [caratheodory_metric_lower(D.base, t, cfg)]
        if D.window.contains(z):
            cands.append(caratheodory_metric_lower(D.window, t, cfg))
        return max(cands, key=lambda c: c[0])
    raise CapabilityError(f"no admissible functional family for {D.kind}")


def _annulus_metric_laurent(D: Annulus, z: complex, X: complex, cfg: SolverConfig):
    r = D.inner_radius
    nneg = npos = max(4, cfg.degree)
    ks = np.arange(-nneg, npos + 1)

    def split(v):
        return v[: ks.size] + 1j * v[ks.size :]

    def deriv_sup(v, certified=True):
        b = split(v)
        fpz = abs(np.sum(b * ks * z ** (ks - 1)))
        sups = []
        for R in (r, 1.0):
            a = b * R ** ks.astype(float)
            if certified:
                sups.append(math.sqrt(max(_trig_max(_abs2_onesided_laurent(a, ks)), 1e-300)))
            else:
                sups.append(float(np.max(np.abs(_LAURENT_GRID[:, None] ** ks @ a))))
        return fpz, max(sups)

    def objective(v):
        fpz, S = deriv_sup(v, certified=False)
        if fpz <= 0 or S <= 0:
            return 10.0
        return -(math.log(fpz) - math.log(S))

    b0 = np.zeros(ks.size, dtype=np.complex128)
    b0[ks == 1] = 1.0
    res = minimize(objective, np.concatenate([b0.real, b0.imag]), method="Powell",
                   options={"maxiter": 6, "maxfev": 4000, "xtol": 1e-8, "ftol": 1e-10})
    fpz, S = deriv_sup(res.x)
    if fpz <= 0 or S <= 0:
        return None
    b = split(res.x)
    val = abs(X) * fpz / (S * (1 + 1e-12))
    return val, ScalarFunctional(
        "laurent", {"coeffs": b, "n_neg": nneg, "n_pos": npos, "sup_norm": S * (1 + 1e-12)}
    )


# ---------------------------------------------------------------------------
# sandwich and integrated Kobayashi distance
# ---------------------------------------------------------------------------


def sandwich(D: Domain, z, w, cfg: Optional[SolverConfig] = None) -> Bracket:
    """Certified bracket [Caratheodory lower, Lempert upper].

    On convex domains the true values coincide, so the width measures the
    total numerical error of the two solvers.
    """
    cfg = cfg or DEFAULT_CONFIG
    lo, func = caratheodory_lower(D, z, w, cfg)
    up, disc = lempert_upper(D, z, w, cfg)
    return Bracket(lower=lo, upper=up, meta={"functional": func, "disc": disc})


@dataclass(frozen=True)
class KobayashiPathBound:
    value: float
    error_estimate: float
    nodes: np.ndarray
    kappa: np.ndarray


def _interior_path(D: Domain, z, w, samples: int = 65) -> np.ndarray:
    ts = np.linspace(0.0, 1.0, samples)
    seg = z[None, :] * (1 - ts[:, None]) + w[None, :] * ts[:, None]
    if np.all(D.margin(seg) < 0):
        return np.stack([z, w])
    if isinstance(D, Annulus):
        # dense waypoints: the closed-form parameterization is angle-based
        # and badly non-uniform, so give the resampler a fine polyline
        pts = annulus_geodesic(complex(z[0]), complex(w[0]), D.inner_radius, np.linspace(0, 1, 2049))
        return pts[:, None]
    # midpoint repair: pull the worst point toward the basepoint
    base = D.basepoint()
    path = [z, w]
    for _ in range(16):
        arr = np.array(path)
        ok = True
        for i in range(len(path) - 1):
            mids = 0.5 * (arr[i] + arr[i + 1])
            if not D.contains(mids):
                ok = False
                lam = 0.5
                cand = mids
                for _ in range(40):
                    cand = (1 - lam) * mids + lam * base
                    if D.contains(cand) and D.boundary_distance(cand) > 1e-3:
                        break
                    lam = min(1.0, lam * 1.3)
                path.insert(i + 1, cand)
                break
        if ok:
            break
    arr = np.array(path)
    for i in range(len(path) - 1):
        seg = arr[i][None, :] * (1 - ts[:, None]) + arr[i + 1][None, :] * ts[:, None]
        if not np.all(D.margin(seg) < 0):
            raise TopologyError("could not construct an interior path")
    return arr


def _resample_path(way: np.ndarray, count: int) -> np.ndarray:
    lens = np.linalg.norm(np.diff(way, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    targets = np.linspace(0.0, cum[-1], count + 1)
    if len(way) > 4 * count:
        # dense curved polyline: snap to its vertices so resampled nodes
        # stay on the curve instead of cutting corners along chords
        idx = np.unique(np.searchsorted(cum, targets).clip(0, len(way) - 1))
        return way[idx]
    out = []
    for s in targets:
        i = min(int(np.searchsorted(cum, s, side="right")) - 1, len(lens) - 1)
        lam = 0.0 if lens[i] == 0 else (s - cum[i]) / lens[i]
        out.append(way[i] * (1 - lam) + way[i + 1] * lam)
    return np.array(out)


def _metric_evaluator(D: Domain, cfg: SolverConfig, source: str):
    if source == "auto":
        source = "oracle" if D.has_closed_form else "solver"
    if source == "oracle":
        from .closed_forms import model_metric

        return lambda p, u: model_metric(D, Tangent(p, u)), "oracle"
    return lambda p, u: kobayashi_metric_upper(D, Tangent(p, u), cfg)[0], "solver"


def _trapezoid_value(nodes, metric_fn) -> tuple:
    kappas = np.empty(len(nodes))
    total = 0.0
    for i in range(len(nodes) - 1):
        d = nodes[i + 1] - nodes[i]
        h = float(np.linalg.norm(d))
        u = d / h
        if i == 0:
            kappas[0] = metric_fn(nodes[0], u)
        kappas[i + 1] = metric_fn(nodes[i + 1], u)
        total += 0.5 * (kappas[i] + kappas[i + 1]) * h
    return total, kappas


def kobayashi_distance_upper(
    D: Domain, z, w, cfg: Optional[SolverConfig] = None, metric: str = "auto"
) -> KobayashiPathBound:
    """Integrated-metric upper bound for the Kobayashi distance.

    Trapezoid sums of metric values along an interior path, with one
    refinement halving the node spacing; the difference between the two
    levels is the declared discretization error estimate.  The metric source
    is the closed form when one exists, else the certified solver upper
    bound (override with metric="solver"/"oracle").
    """
    cfg = cfg or DEFAULT_CONFIG
    z = as_point(z, D.dimension)
    w = as_point(w, D.dimension)
    if np.array_equal(z, w):
        return KobayashiPathBound(0.0, 0.0, np.stack([z]), np.zeros(1))
    way = _interior_path(D, z, w)
    metric_cfg = SolverConfig(
        degree=min(cfg.degree, 4),
        boundary_samples=min(cfg.boundary_samples, 64),
        restarts=min(cfg.restarts, 2),
        tol=cfg.tol,
        seed=cfg.seed,
        maxiter=min(cfg.maxiter, 50),
        min_boundary_distance=cfg.min_boundary_distance,
    )
    metric_fn, source = _metric_evaluator(D, metric_cfg, metric)
    P = max(cfg.path_nodes, 2)
    nodes = _resample_path(way, P)
    coarse, _ = _trapezoid_value(nodes, metric_fn)
    if cfg.node_moves:
        nodes = _local_node_moves(D, nodes, metric_fn, metric_cfg)
    fine_nodes = _resample_path(nodes, 2 * P)
    fine, kappas = _trapezoid_value(fine_nodes, metric_fn)
    value = min(coarse, fine)
    err = abs(coarse - fine) + cfg.tol
    if source == "solver":
        # the Lempert value dominates the Kobayashi distance on any domain,
        # so its certified upper bound tightens a loose integrated one
        try:
            l_up, _ = lempert_upper(D, z, w, cfg)
            value = min(value, l_up)
        except (SolverFailure, ValueError):
            pass
    return KobayashiPathBound(value, err, fine_nodes, kappas)


def _local_node_moves(D, nodes, metric_fn, cfg):
    """One sweep of perpendicular node offsets, keeping improvements."""
    nodes = nodes.copy()
    for i in range(1, len(nodes) - 1):
        seg = nodes[i + 1] - nodes[i - 1]
        h = np.linalg.norm(seg)
        if h == 0:
            continue
        u = seg / h
        perp = 1j * u
        step = 0.25 * min(
            np.linalg.norm(nodes[i] - nodes[i - 1]), np.linalg.norm(nodes[i + 1] - nodes[i])
        )

        def local_cost(p):
            if not D.contains(p) or D.boundary_distance(p) < cfg.min_boundary_distance:
                return math.inf
            c = 0.0
            for a, b in ((nodes[i - 1], p), (p, nodes[i + 1])):
                d = b - a
                hh = float(np.linalg.norm(d))
                if hh == 0:
                    continue
                c += 0.5 * (metric_fn(a, d / hh) + metric_fn(b, d / hh)) * hh
            return c

        cands = [nodes[i], nodes[i] + step * perp, nodes[i] - step * perp]
        costs = [local_cost(p) for p in cands]
        nodes[i] = cands[int(np.argmin(costs))]
    return nodes
