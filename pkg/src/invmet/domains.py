"""Model domain geometries in C^n.

Every domain kind here has exact membership and an exact (or certified
high-accuracy) Euclidean distance to the boundary, since those two
quantities enter all comparison bounds multiplicatively.  Geometry objects
are immutable; all operations are pure functions of their arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .errors import CapabilityError, OutsideDomainError, SamplingError, SetupError

# Points closer to the boundary than this are rejected by samplers: every
# hyperbolic quantity diverges logarithmically there.
BOUNDARY_GUARD = 1e-10


def as_point(z, dim: Optional[int] = None) -> np.ndarray:
    """Coerce to a complex (n,) vector, validating finiteness and dimension."""
    arr = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    if arr.ndim != 1:
        raise ValueError(f"a point must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point has non-finite entries")
    if dim is not None and arr.size != dim:
        raise ValueError(f"dimension mismatch: needed {dim}, got {arr.size}")
    return arr


def herm(a: np.ndarray, b: np.ndarray) -> complex:
    """Hermitian inner product sum(a * conj(b))."""
    return complex(np.sum(a * np.conj(b)))


@dataclass(frozen=True)
class Tangent:
    """A base point together with a direction vector."""

    base: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", as_point(self.base))
        object.__setattr__(self, "direction", as_point(self.direction, self.base.size))


@dataclass(frozen=True)
class Window:
    """A pair of concentric localization balls around a boundary point.

    Models the inner/outer neighborhood pair used by the localization
    suite; requires a strict gap between the two radii.
    """

    center: np.ndarray
    r_outer: float
    r_inner: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not 0 < self.r_inner < self.r_outer:
            raise ValueError("window radii must satisfy 0 < r_inner < r_outer")
        if self.r_inner > 0.9 * self.r_outer:
            raise ValueError("window radii need a strict gap: r_inner <= 0.9 * r_outer")


class Domain:
    """Base class for model domains.  Subclasses are frozen dataclasses."""

    dimension: int
    is_convex: bool
    has_closed_form: bool
    kind: str

    # -- membership / distance -------------------------------------------

    def kernel_atoms(self):
        """Flat atom encoding consumed by the numerical kernels."""
        code, f, c = self._atom()
        return (
            np.array([code], dtype=np.int32),
            np.array([0, len(f)], dtype=np.int64),
            np.asarray(f, dtype=np.float64),
            np.array([0, len(c)], dtype=np.int64),
            np.asarray(c, dtype=np.complex128),
        )

    def margin(self, pts) -> np.ndarray:
        """Signed violation margin, vectorized: negative inside the domain."""
        pts = np.asarray(pts, dtype=np.complex128)
        return _kernels.margin_points(*self.kernel_atoms(), pts)

    def contains(self, z) -> bool:
        z = as_point(z, self.dimension)
        return bool(self.margin(z[None, :])[0] < 0.0)

    def boundary_distance(self, z) -> float:
        z = as_point(z, self.dimension)
        if not self.contains(z):
            raise OutsideDomainError(f"point {z} is not interior to {self.kind}")
        return self._delta(z)

    def directional_radius(self, z, v) -> float:
        """Largest t with the affine disc {z + zeta*v : |zeta| < t} inside.

        v is normalized internally; the value is exact for all kinds except
        the ellipsoid, where it is a certified lower bound from a phase grid.
        """
        z = as_point(z, self.dimension)
        v = as_point(v, self.dimension)
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            raise ValueError("direction must be nonzero")
        if not self.contains(z):
            raise OutsideDomainError("base point must be interior")
        return self._dir_radius(z, v / nv)

    def affine_disc_radius(self, z) -> float:
        """Maximal radius of complex affine discs centered at z inside D."""
        z = as_point(z, self.dimension)
        if not self.contains(z):
            raise OutsideDomainError("point must be interior")
        return self._affine_radius(z)

    # -- samplers ---------------------------------------------------------

    def basepoint(self) -> np.ndarray:
        raise NotImplementedError

    def sample_interior(self, count: int, rng) -> np.ndarray:
        """(count, n) interior points, deterministic per rng state."""
        raise NotImplementedError

    def sample_boundary(self, count: int, rng) -> np.ndarray:
        raise NotImplementedError

    def boundary_normal(self, p) -> np.ndarray:
        """Outward unit complex normal at a boundary point."""
        raise CapabilityError(f"no boundary normal for kind {self.kind}")

    # -- serialization ----------------------------------------------------

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": self._params_json()}

    def _params_json(self) -> dict:
        return {}

    def describe(self) -> str:
        parts = [
            f"{self.kind} in C^{self.dimension}",
            "convex" if self.is_convex else "non-convex",
            "closed-form distance" if self.has_closed_form else "solver-estimated distance",
        ]
        return ", ".join(parts)

    # subclass hooks
    def _atom(self):
        raise NotImplementedError

    def _delta(self, z) -> float:
        raise NotImplementedError

    def _dir_radius(self, z, v) -> float:
        raise NotImplementedError

    def _affine_radius(self, z) -> float:
        if self.dimension == 1:
            # any affine disc in the plane is a round disc
            return self._delta(z)
        return _affine_radius_search(self, z)


def _cx_json(arr) -> list:
    return [[float(np.real(c)), float(np.imag(c))] for c in np.atleast_1d(arr)]


def _cx_from_json(pairs) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs], dtype=np.complex128)


@dataclass(frozen=True)
class UnitDisc(Domain):
    kind: str = field(default="unit_disc", init=False)
    dimension: int = field(default=1, init=False)
    is_convex: bool = field(default=True, init=False)
    has_closed_form: bool = field(default=True, init=False)

    def _atom(self):
        return _kernels.DISC, [], []

    def _delta(self, z):
        return 1.0 - abs(complex(z[0]))

    def _dir_radius(self, z, v):
        return self._delta(z)

    def basepoint(self):
        return np.zeros(1, dtype=np.complex128)

    def sample_interior(self, count, rng):
        r = np.sqrt(rng.uniform(0, 1, count)) * (1 - 2 * BOUNDARY_GUARD)
        th = rng.uniform(0, 2 * np.pi, count)
        return (r * np.exp(1j * th))[:, None]

    def sample_boundary(self, count, rng):
        th = rng.uniform(0, 2 * np.pi, count)
        return np.exp(1j * th)[:, None]

    def boundary_normal(self, p):
        p = as_point(p, 1)
        return p / abs(complex(p[0]))


@dataclass(frozen=True)
class Ball(Domain):
    center: np.ndarray = None
    radius: float = 1.0
    kind: str = field(default="ball", init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    @property
    def dimension(self):
        return self.center.size

    is_convex = True
    has_closed_form = True

    def _atom(self):
        return _kernels.BALL, [self.radius], self.center

    def _delta(self, z):
        return self.radius - float(np.linalg.norm(z - self.center))

    def _dir_radius(self, z, v):
        d = z - self.center
        p = abs(herm(v, d))
        return -p + math.sqrt(p * p + self.radius**2 - float(np.linalg.norm(d)) ** 2)

    def _affine_radius(self, z):
        if self.dimension == 1:
            return self._delta(z)
        s2 = float(np.linalg.norm(z - self.center)) ** 2
        return math.sqrt(self.radius**2 - s2)

    def basepoint(self):
        return self.center.copy()

    def sample_interior(self, count, rng):
        n = self.dimension
        g = rng.normal(size=(count, 2 * n)).view(np.complex128)
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = rng.uniform(0, 1, count) ** (1.0 / (2 * n)) * (1 - 2 * BOUNDARY_GUARD)
        return self.center + self.radius * r[:, None] * g

    def sample_boundary(self, count, rng):
        n = self.dimension
        g = rng.normal(size=(count, 2 * n)).view(np.complex128)
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return self.center + self.radius * g

    def boundary_normal(self, p):
        p = as_point(p, self.dimension)
        d = p - self.center
        return d / np.linalg.norm(d)

    def _params_json(self):
        return {"center": _cx_json(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Polydisc(Domain):
    radii: np.ndarray = None
    kind: str = field(default="polydisc", init=False)

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=np.float64)
        if r.ndim != 1 or not np.all(r > 0):
            raise ValueError("polydisc radii must be a vector of positives")
        object.__setattr__(self, "radii", r)

    @property
    def dimension(self):
        return self.radii.size

    is_convex = True
    has_closed_form = True

    def _atom(self):
        return _kernels.POLYDISC, self.radii, []

    def _delta(self, z):
        return float(np.min(self.radii - np.abs(z)))

    def _dir_radius(self, z, v):
        with np.errstate(divide="ignore"):
            t = np.where(np.abs(v) > 0, (self.radii - np.abs(z)) / np.abs(v), np.inf)
        return float(np.min(t))

    def _affine_radius(self, z):
        return float(np.max(self.radii - np.abs(z)))

    def basepoint(self):
        return np.zeros(self.dimension, dtype=np.complex128)

    def sample_interior(self, count, rng):
        n = self.dimension
        r = np.sqrt(rng.uniform(0, 1, (count, n))) * (1 - 2 * BOUNDARY_GUARD)
        th = rng.uniform(0, 2 * np.pi, (count, n))
        return self.radii * r * np.exp(1j * th)

    def sample_boundary(self, count, rng):
        n = self.dimension
        pts = self.sample_interior(count, rng)
        faces = rng.integers(0, n, count)
        th = rng.uniform(0, 2 * np.pi, count)
        pts[np.arange(count), faces] = self.radii[faces] * np.exp(1j * th)
        return pts

    def boundary_normal(self, p):
        p = as_point(p, self.dimension)
        j = int(np.argmax(np.abs(p) / self.radii))
        nu = np.zeros(self.dimension, dtype=np.complex128)
        nu[j] = p[j] / abs(p[j])
        return nu

    def _params_json(self):
        return {"radii": [float(r) for r in self.radii]}


@dataclass(frozen=True)
class ComplexEllipsoid(Domain):
    """{ sum |z_j|^(2 m_j) < 1 } with all exponents m_j >= 1 (hence convex)."""

    exponents: np.ndarray = None
    kind: str = field(default="complex_ellipsoid", init=False)

    def __post_init__(self):
        m = np.asarray(self.exponents, dtype=np.float64)
        if m.ndim != 1 or not np.all(m >= 1.0):
            raise ValueError("ellipsoid exponents must all be >= 1")
        object.__setattr__(self, "exponents", m)

    @property
    def dimension(self):
        return self.exponents.size

    is_convex = True
    has_closed_form = False

    def _atom(self):
        return _kernels.ELLIPSOID, self.exponents, []

    def _delta(self, z):
        return _ellipsoid_boundary_distance(self.exponents, np.abs(z))

    def _dir_radius(self, z, v, nphase: int = 128):
        # sup over the phase circle is not separable across coordinates;
        # bisection on t against a phase grid gives a certified lower bound
        m = self.exponents

        def worst(t):
            th = np.linspace(0.0, 2 * np.pi, nphase, endpoint=False)
            pts = z[None, :] + t * np.exp(1j * th)[:, None] * v[None, :]
            return float(np.max(np.sum(np.abs(pts) ** (2 * m), axis=1)))

        lo = 0.0
        hi = self._delta(z)
        while worst(2 * hi) < 1.0:
            hi *= 2.0
        lo, hi = hi, 2 * hi
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if worst(mid) < 1.0:
                lo = mid
            else:
                hi = mid
        return lo

    def basepoint(self):
        return np.zeros(self.dimension, dtype=np.complex128)

    def sample_interior(self, count, rng):
        out = np.empty((count, self.dimension), dtype=np.complex128)
        got = 0
        while got < count:
            cand = Polydisc(np.ones(self.dimension)).sample_interior(count, rng)
            ok = np.sum(np.abs(cand) ** (2 * self.exponents), axis=1) < 1.0 - BOUNDARY_GUARD
            take = cand[ok][: count - got]
            out[got : got + take.shape[0]] = take
            got += take.shape[0]
        return out

    def sample_boundary(self, count, rng):
        n = self.dimension
        g = rng.normal(size=(count, 2 * n)).view(np.complex128)
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        out = np.empty_like(g)
        for i, u in enumerate(g):
            out[i] = u * _ray_exit(self.exponents, np.abs(u))
        return out

    def boundary_normal(self, p):
        p = as_point(p, self.dimension)
        m = self.exponents
        nu = m * np.abs(p) ** (2 * m - 2) * p
        return nu / np.linalg.norm(nu)

    def _params_json(self):
        return {"exponents": [float(m) for m in self.exponents]}


@dataclass(frozen=True)
class Annulus(Domain):
    """{ r < |z| < 1 } in the plane, 0 < r < 1."""

    inner_radius: float = 0.3
    kind: str = field(default="annulus", init=False)
    dimension: int = field(default=1, init=False)
    is_convex: bool = field(default=False, init=False)
    has_closed_form: bool = field(default=True, init=False)

    def __post_init__(self):
        if not 0 < self.inner_radius < 1:
            raise ValueError("annulus inner radius must lie in (0, 1)")

    def _atom(self):
        return _kernels.ANNULUS, [self.inner_radius], []

    def _delta(self, z):
        r = abs(complex(z[0]))
        return min(r - self.inner_radius, 1.0 - r)

    def _dir_radius(self, z, v):
        return self._delta(z)

    def basepoint(self):
        return np.array([0.5 * (1 + self.inner_radius)], dtype=np.complex128)

    def sample_interior(self, count, rng):
        r = rng.uniform(self.inner_radius + 2 * BOUNDARY_GUARD, 1 - 2 * BOUNDARY_GUARD, count)
        th = rng.uniform(0, 2 * np.pi, count)
        return (r * np.exp(1j * th))[:, None]

    def sample_boundary(self, count, rng):
        rin = self.inner_radius
        pick_outer = rng.uniform(0, 1 + rin, count) > rin
        r = np.where(pick_outer, 1.0, rin)
        th = rng.uniform(0, 2 * np.pi, count)
        return (r * np.exp(1j * th))[:, None]

    def boundary_normal(self, p):
        p = as_point(p, 1)
        u = p / abs(complex(p[0]))
        outer = abs(abs(complex(p[0])) - 1.0) < abs(abs(complex(p[0])) - self.inner_radius)
        return u if outer else -u

    def _params_json(self):
        return {"inner_radius": self.inner_radius}


@dataclass(frozen=True)
class HalfPlane(Domain):
    """{ z : Re <z, normal> < offset }; unbounded, convex.

    In C^1 this is a plane half-plane; for n >= 2 it is a half-space whose
    boundary hyperplane contains complex affine discs.
    """

    normal: np.ndarray = None
    offset: float = 0.0
    kind: str = field(default="half_plane", init=False)

    def __post_init__(self):
        nu = as_point(self.normal)
        nrm = float(np.linalg.norm(nu))
        if nrm == 0:
            raise ValueError("half-plane normal must be nonzero")
        object.__setattr__(self, "normal", nu / nrm)

    @property
    def dimension(self):
        return self.normal.size

    is_convex = True
    has_closed_form = True

    def _atom(self):
        return _kernels.HALFPLANE, [self.offset], self.normal

    def _delta(self, z):
        return self.offset - float(np.real(herm(z, self.normal)))

    def _dir_radius(self, z, v):
        a = abs(herm(v, self.normal))
        return self._delta(z) / a if a > 0 else math.inf

    def _affine_radius(self, z):
        return self._delta(z) if self.dimension == 1 else math.inf

    def basepoint(self):
        return (self.offset - 1.0) * self.normal

    def sample_interior(self, count, rng):
        n = self.dimension
        depth = rng.exponential(1.0, count) + 2 * BOUNDARY_GUARD
        tang = rng.normal(size=(count, 2 * n)).view(np.complex128)
        tang -= (tang @ np.conj(self.normal))[:, None] * self.normal
        return self.offset * self.normal - depth[:, None] * self.normal + tang

    def sample_boundary(self, count, rng):
        n = self.dimension
        tang = rng.normal(size=(count, 2 * n)).view(np.complex128)
        tang -= (tang @ np.conj(self.normal))[:, None] * self.normal
        return self.offset * self.normal + tang

    def boundary_normal(self, p):
        return self.normal.copy()

    def _params_json(self):
        return {"normal": _cx_json(self.normal), "offset": self.offset}


@dataclass(frozen=True)
class Intersection(Domain):
    """base ∩ window-ball; the window models a localization neighborhood.

    Construction verifies that the intersection is nonempty and, by a
    coarse flood fill, connected.
    """

    base: Domain = None
    window: Ball = None
    kind: str = field(default="intersection", init=False)

    def __post_init__(self):
        if self.base.dimension != self.window.dimension:
            raise SetupError("base and window dimensions differ")
        ok, reason = _check_overlap_connected(self.base, self.window)
        if not ok:
            raise SetupError(f"invalid intersection: {reason}")

    @property
    def dimension(self):
        return self.base.dimension

    @property
    def is_convex(self):
        return self.base.is_convex

    has_closed_form = False

    def kernel_atoms(self):
        bc, bfi, bf, bci, bcx = self.base.kernel_atoms()
        wc, wfi, wf, wci, wcx = self.window.kernel_atoms()
        codes = np.concatenate([bc, wc])
        fidx = np.concatenate([bfi, bfi[-1] + wfi[1:]])
        cidx = np.concatenate([bci, bci[-1] + wci[1:]])
        return codes, fidx, np.concatenate([bf, wf]), cidx, np.concatenate([bcx, wcx])

    def _delta(self, z):
        return min(self.base._delta(z), self.window._delta(z))

    def _dir_radius(self, z, v):
        return min(self.base._dir_radius(z, v), self.window._dir_radius(z, v))

    def _affine_radius(self, z):
        if self.dimension == 1:
            return self._delta(z)
        if not self.is_convex:
            raise CapabilityError("affine disc radius on non-convex intersections")
        return _affine_radius_search(self, z)

    def basepoint(self):
        rng = np.random.default_rng(0)
        pts = []
        for _ in range(64):
            cand = self.window.sample_interior(64, rng)
            inside = self.base.margin(cand) < -BOUNDARY_GUARD
            pts.extend(cand[inside])
            if len(pts) >= 64:
                break
        if not pts:
            raise SamplingError("could not find an interior point of the intersection")
        pts = np.array(pts)
        deltas = [self._delta(p) for p in pts]
        return pts[int(np.argmax(deltas))]

    def sample_interior(self, count, rng):
        out = np.empty((count, self.dimension), dtype=np.complex128)
        got = 0
        for _ in range(400):
            cand = self.window.sample_interior(max(count, 32), rng)
            ok = self.base.margin(cand) < -BOUNDARY_GUARD
            take = cand[ok][: count - got]
            out[got : got + take.shape[0]] = take
            got += take.shape[0]
            if got == count:
                return out
        raise SamplingError("intersection interior sampling exhausted its retry budget")

    def describe(self) -> str:
        return (
            f"intersection of [{self.base.describe()}] with window ball "
            f"(radius {self.window.radius:g}) in C^{self.dimension}, "
            f"{'convex' if self.is_convex else 'non-convex'}, connectivity checked"
        )

    def _params_json(self):
        return {"base": self.base.to_json(), "window": self.window.to_json()}


# ---------------------------------------------------------------------------
# ellipsoid support function and boundary distance
# ---------------------------------------------------------------------------


def _ray_exit(m, u_abs):
    """t > 0 with sum (t*u_j)^(2 m_j) = 1 along a fixed direction."""
    lo, hi = 0.0, 1.0

    def g(t):
        return float(np.sum((t * u_abs) ** (2 * m))) - 1.0

    while g(hi) < 0:
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ellipsoid_support(m, a_abs) -> float:
    """Support function sup { sum a_j t_j : sum t_j^(2 m_j) <= 1, t >= 0 }.

    The Lagrange dual reduces to one monotone equation sum c_j mu^(-p_j) = 1
    with p_j = 2 m_j / (2 m_j - 1), solved by Newton in log mu.
    """
    m = np.asarray(m, dtype=np.float64)
    a = np.asarray(a_abs, dtype=np.float64)
    pos = a > 0
    if not np.any(pos):
        return 0.0
    mp, ap = m[pos], a[pos]
    p = 2 * mp / (2 * mp - 1)
    c = (ap / (2 * mp)) ** p
    # F(s) = sum c e^{-p s} - 1 is convex decreasing in s = log mu; starting
    # at max log(c)/p keeps F >= 0, so Newton converges monotonically
    s = float(np.max(np.log(np.maximum(c, 1e-300)) / p))
    for _ in range(100):
        e = c * np.exp(-p * s)
        F = float(np.sum(e)) - 1.0
        dF = -float(np.sum(p * e))
        step = F / dF
        s -= step
        if abs(step) < 1e-15:
            break
    mu = math.exp(s)
    t = (ap / (2 * mp * mu)) ** (1.0 / (2 * mp - 1))
    return float(np.sum(ap * t))


def _ellipsoid_boundary_distance(m, x_abs):
    """dist(x, boundary) on the positive orthant of moduli.

    For a convex body the inradius at an interior point is the minimum over
    unit support directions of h(u) - <x, u>; torus symmetry reduces the
    directions to the nonnegative orthant of the moduli.
    """
    m = np.asarray(m, dtype=np.float64)
    x = np.asarray(x_abs, dtype=np.float64)
    n = x.size
    if n == 1:
        return 1.0 - float(x[0])

    def depth(u):
        return ellipsoid_support(m, u) - float(np.sum(u * x))

    if n == 2:
        def f(th):
            return depth(np.array([math.cos(th), math.sin(th)]))

        thetas = np.linspace(0.0, math.pi / 2, 257)
        vals = [f(t) for t in thetas]
        i = int(np.argmin(vals))
        lo = thetas[max(i - 1, 0)]
        hi = thetas[min(i + 1, len(thetas) - 1)]
        for _ in range(80):
            m1 = lo + (hi - lo) / 3
            m2 = hi - (hi - lo) / 3
            if f(m1) < f(m2):
                hi = m2
            else:
                lo = m1
        return f(0.5 * (lo + hi))
    # n >= 3: direction grid plus local pattern refinement
    rng = np.random.default_rng(4)
    dirs = np.abs(rng.normal(size=(256, n)))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    vals = [depth(u) for u in dirs]
    best = dirs[int(np.argmin(vals))]
    step = 0.25
    val = depth(best)
    for _ in range(200):
        improved = False
        for j in range(n):
            for sgn in (1, -1):
                cand = best.copy()
                cand[j] = max(cand[j] + sgn * step, 0.0)
                nc = np.linalg.norm(cand)
                if nc == 0:
                    continue
                cand /= nc
                v = depth(cand)
                if v < val - 1e-15:
                    best, val = cand, v
                    improved = True
        if not improved:
            step *= 0.5
            if step < 1e-10:
                break
    return val


# ---------------------------------------------------------------------------
# affine disc radius by direction search (non-closed-form kinds)
# ---------------------------------------------------------------------------


def _affine_radius_search(D: Domain, z, ndirs: int = 256, refine: int = 3) -> float:
    """Lower bound for the maximal affine disc radius via a direction grid.

    Directions live on the unit sphere modulo phase; a deterministic grid
    plus a few rounds of local refinement gives order-of-magnitude fidelity,
    which is all the flatness probes need.
    """
    n = D.dimension
    rng = np.random.default_rng(12345)
    dirs = rng.normal(size=(ndirs, 2 * n)).view(np.complex128)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    vals = np.array([D._dir_radius(z, v) for v in dirs])
    best = int(np.argmax(vals))
    best_v, best_t = dirs[best], vals[best]
    scale = 0.5
    for _ in range(refine):
        cand = best_v[None, :] + scale * rng.normal(size=(32, 2 * n)).view(np.complex128)
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        vals = np.array([D._dir_radius(z, v) for v in cand])
        i = int(np.argmax(vals))
        if vals[i] > best_t:
            best_t, best_v = vals[i], cand[i]
        scale *= 0.5
    return float(best_t)


# ---------------------------------------------------------------------------
# intersection overlap / connectivity: coarse grid flood fill
# ---------------------------------------------------------------------------


def _check_overlap_connected(base: Domain, window: Ball, per_side: Optional[int] = None):
    n = base.dimension
    if per_side is None:
        per_side = 16 if n <= 2 else 8
    c, R = window.center, window.radius
    axes = [np.linspace(-R, R, per_side) for _ in range(2 * n)]
    grids = np.meshgrid(*axes, indexing="ij")
    flat = np.stack([g.ravel() for g in grids], axis=1)
    pts = c[None, :] + flat[:, 0::2] + 1j * flat[:, 1::2]
    inside = (window.margin(pts) < 0) & (base.margin(pts) < 0)
    if not np.any(inside):
        return False, "empty intersection on the sampling grid"
    shape = (per_side,) * (2 * n)
    mask = inside.reshape(shape)
    labels = _flood_count(mask)
    if labels > 1:
        return False, f"intersection splits into {labels} grid components"
    return True, ""


def _flood_count(mask: np.ndarray) -> int:
    """Number of connected components of True cells (axis neighbors)."""
    mask = mask.copy()
    ndim = mask.ndim
    count = 0
    idx = np.argwhere(mask)
    while idx.size:
        count += 1
        stack = [tuple(idx[0])]
        mask[tuple(idx[0])] = False
        while stack:
            cell = stack.pop()
            for ax in range(ndim):
                for step in (-1, 1):
                    nb = list(cell)
                    nb[ax] += step
                    if 0 <= nb[ax] < mask.shape[ax]:
                        nb = tuple(nb)
                        if mask[nb]:
                            mask[nb] = False
                            stack.append(nb)
        idx = np.argwhere(mask)
    return count


# ---------------------------------------------------------------------------
# probes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MConvexityReport:
    max_ratio: float
    worst_point: np.ndarray
    bands: list  # (delta_mid, sup ratio) per dyadic band
    slope: float  # growth rate of log sup-ratio against log(1/delta)
    divergent: bool


def m_convexity_probe(
    D: Domain,
    m: float,
    samples: int = 200,
    seed: int = 0,
    delta_max: float = 0.1,
    delta_min: float = 1e-5,
) -> MConvexityReport:
    """Sup of affine-disc radius over delta^(1/m) on near-boundary samples.

    A bounded, stable sup across shrinking boundary-distance bands is
    evidence for m-convexity of the domain; growth beyond any bound as
    delta -> 0 is evidence against.
    """
    if m <= 0:
        raise ValueError("m must be positive")
    if not D.is_convex:
        raise CapabilityError("m-convexity probe requires a convex domain")
    rng = np.random.default_rng(seed)
    deltas = np.exp(rng.uniform(np.log(delta_min), np.log(delta_max), samples))
    bpts = D.sample_boundary(samples, rng)
    best = (-math.inf, None)
    rows = []
    for p, d in zip(bpts, deltas):
        nu = D.boundary_normal(p)
        z = p - d * nu
        if not D.contains(z):
            continue
        dz = D.boundary_distance(z)
        if dz < BOUNDARY_GUARD:
            continue
        ratio = D.affine_disc_radius(z) / dz ** (1.0 / m)
        rows.append((dz, ratio))
        if ratio > best[0]:
            best = (ratio, z)
    if not rows:
        raise SamplingError("no usable near-boundary samples")
    rows.sort()
    edges = np.geomspace(delta_min, delta_max, 7)
    bands = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = [r for d, r in rows if lo <= d < hi]
        if sel:
            bands.append((math.sqrt(lo * hi), max(sel)))
    if len(bands) >= 2:
        xs = np.log([1.0 / b[0] for b in bands])
        ys = np.log([b[1] for b in bands])
        slope = float(np.polyfit(xs, ys, 1)[0])
    else:
        slope = 0.0
    return MConvexityReport(
        max_ratio=best[0],
        worst_point=best[1],
        bands=bands,
        slope=slope,
        divergent=slope >= 0.25,
    )


@dataclass(frozen=True)
class AffineDiscWitness:
    center: np.ndarray
    direction: np.ndarray
    radius: float

    def points(self, count: int = 64) -> np.ndarray:
        th = np.linspace(0, 2 * np.pi, count, endpoint=False)
        return self.center[None, :] + self.radius * np.exp(1j * th)[:, None] * self.direction[None, :]


@dataclass(frozen=True)
class DiscFreeVerdict:
    found: bool
    witness: Optional[AffineDiscWitness]
    method: str


def disc_free_certificate(D: Domain, samples: int = 400, radius: float = 0.9, seed: int = 0) -> DiscFreeVerdict:
    """Search the boundary for a nonconstant complex affine disc.

    Flat boundary pieces (polydisc faces, half-space hyperplanes) yield an
    explicit witness; strictly convex boundaries are certified disc-free by
    a sampled-chord midpoint check; planar boundaries carry no affine disc.
    """
    if isinstance(D, Polydisc) and D.dimension >= 2:
        j = int(np.argmax(D.radii))
        k = int(np.argmax(np.where(np.arange(D.dimension) == j, -np.inf, D.radii)))
        center = np.zeros(D.dimension, dtype=np.complex128)
        center[j] = D.radii[j]
        direction = np.zeros(D.dimension, dtype=np.complex128)
        direction[k] = 1.0
        return DiscFreeVerdict(True, AffineDiscWitness(center, direction, radius * D.radii[k]), "face")
    if isinstance(D, HalfPlane):
        if D.dimension == 1:
            return DiscFreeVerdict(False, None, "planar boundary")
        nu = D.normal
        tang = np.zeros(D.dimension, dtype=np.complex128)
        tang[0] = 1.0
        tang -= herm(tang, nu) * nu
        if np.linalg.norm(tang) < 1e-9:
            tang = np.zeros(D.dimension, dtype=np.complex128)
            tang[1] = 1.0
            tang -= herm(tang, nu) * nu
        tang /= np.linalg.norm(tang)
        return DiscFreeVerdict(True, AffineDiscWitness(D.offset * nu, tang, radius), "hyperplane")
    if D.dimension == 1:
        return DiscFreeVerdict(False, None, "planar boundary")
    if isinstance(D, (Ball, ComplexEllipsoid)):
        rng = np.random.default_rng(seed)
        p = D.sample_boundary(samples, rng)
        q = D.sample_boundary(samples, rng)
        mid = 0.5 * (p + q)
        margins = D.margin(mid)
        sep = np.linalg.norm(p - q, axis=1)
        ok = sep > 1e-6
        if np.all(margins[ok] < -1e-12 * sep[ok] ** 2):
            return DiscFreeVerdict(False, None, "strict convexity of sampled chords")
        bad = int(np.argmax(margins - 1e-12 * sep**2))
        direction = q[bad] - p[bad]
        direction = direction / np.linalg.norm(direction)
        return DiscFreeVerdict(True, AffineDiscWitness(mid[bad], direction, 0.5 * sep[bad]), "flat chord")
    if isinstance(D, Intersection):
        inner = disc_free_certificate(D.base, samples=samples, radius=radius, seed=seed)
        if inner.found and inner.witness is not None:
            w = inner.witness
            room = D.window.radius - float(np.linalg.norm(w.center - D.window.center))
            if room > 1e-9:
                return DiscFreeVerdict(
                    True, AffineDiscWitness(w.center, w.direction, min(w.radius, 0.9 * room)), "base face in window"
                )
        return DiscFreeVerdict(False, None, "no witness found in window")
    raise CapabilityError(f"disc-free certificate unsupported for {D.kind}")


def strict_c_convexity_probe(D: Domain, p, samples: int = 256, tolerance: float = 1e-8) -> bool:
    """True iff no probed boundary point besides p lies in p's complex tangent plane."""
    p = as_point(p, D.dimension)
    if abs(float(D.margin(p[None, :])[0])) > 1e-6:
        raise ValueError("p must lie on the boundary (within tolerance)")
    if not D.is_convex:
        raise CapabilityError("strict C-convexity probe is defined here for convex models")
    n = D.dimension
    if n == 1:
        return True
    nu = D.boundary_normal(p)
    rng = np.random.default_rng(7)
    basis = rng.normal(size=(samples, 2 * n)).view(np.complex128)
    basis -= (basis @ np.conj(nu))[:, None] * nu
    norms = np.linalg.norm(basis, axis=1, keepdims=True)
    keep = norms[:, 0] > 1e-12
    basis = basis[keep] / norms[keep]
    scales = np.geomspace(1e-3, 1.0, 12)
    for s in scales:
        cand = p[None, :] + s * basis
        on_boundary = np.abs(D.margin(cand)) <= tolerance
        if np.any(on_boundary):
            return False
    return True


def sample_pair_near(
    D: Domain,
    p,
    delta_min: float,
    delta_max: float,
    seed: int = 0,
    max_tries: int = 20000,
):
    """Two distinct interior points with boundary distance in [delta_min, delta_max].

    Concentrates near the boundary point p when one is given.  Deterministic
    per seed; raises SamplingError when the constraints cannot be met within
    the retry budget.
    """
    if not 0 < delta_min < delta_max:
        raise ValueError("need 0 < delta_min < delta_max")
    rng = np.random.default_rng(seed)
    pts = []
    tries = 0
    pvec = None if p is None else as_point(p, D.dimension)
    while len(pts) < 2 and tries < max_tries:
        tries += 1
        if pvec is not None:
            d = np.exp(rng.uniform(np.log(delta_min), np.log(delta_max)))
            nu = D.boundary_normal(pvec)
            tang = rng.normal(size=2 * D.dimension).view(np.complex128)
            tang -= np.real(herm(tang, nu)) * nu
            z = pvec - d * nu + d * rng.uniform(0, 2.0) * tang / max(np.linalg.norm(tang), 1e-12)
        else:
            z = D.sample_interior(1, rng)[0]
        if not D.contains(z):
            continue
        dz = D.boundary_distance(z)
        if not (delta_min <= dz <= delta_max) or dz < BOUNDARY_GUARD:
            continue
        if pts and np.linalg.norm(z - pts[0]) < 1e-9:
            continue
        pts.append(z)
    if len(pts) < 2:
        raise SamplingError(
            f"could not sample a pair with delta in [{delta_min}, {delta_max}] after {max_tries} tries"
        )
    return pts[0], pts[1]


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------


def domain_from_json(obj: dict) -> Domain:
    """Build a domain from the {"kind": ..., "params": ...} wire format."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValueError("domain JSON must be an object with a 'kind' field")
    kind = obj["kind"]
    params = obj.get("params", {})
    try:
        if kind == "unit_disc":
            return UnitDisc()
        if kind == "ball":
            return Ball(center=_cx_from_json(params["center"]), radius=float(params["radius"]))
        if kind == "polydisc":
            return Polydisc(radii=np.asarray(params["radii"], dtype=np.float64))
        if kind == "complex_ellipsoid":
            return ComplexEllipsoid(exponents=np.asarray(params["exponents"], dtype=np.float64))
        if kind == "annulus":
            return Annulus(inner_radius=float(params["inner_radius"]))
        if kind == "half_plane":
            return HalfPlane(normal=_cx_from_json(params["normal"]), offset=float(params["offset"]))
        if kind == "intersection":
            base = domain_from_json(params["base"])
            win = domain_from_json(params["window"])
            if not isinstance(win, Ball):
                raise ValueError("intersection window must be a ball")
            return Intersection(base=base, window=win)
    except KeyError as exc:
        raise ValueError(f"missing parameter for kind '{kind}': {exc}") from exc
    raise ValueError(f"unknown domain kind '{kind}'")
