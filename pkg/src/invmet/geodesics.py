"""Gromov products, geodesic construction/verification, visibility and
strong-completeness probes, and boundary behavior of geodesic families.

Divergence verdicts follow a declared statistical rule: the probes compute
finite sequences, regress the doubled product against the appropriate
growth coordinate over the tail, and compare the slope against thresholds
calibrated on the disc, where the exact rates are computable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .closed_forms import model_distance, poincare_distance
from .domains import Annulus, Domain, as_point
from .errors import CapabilityError, GeodesicRejection, SolverFailure
from .extremal import (
    AnalyticDisc,
    SolverConfig,
    caratheodory_lower,
    lempert_upper,
)

VISIBILITY_SLOPE = 0.25
COMPLETENESS_SLOPE = 0.4
GEODESIC_TOL = 5e-3


# ---------------------------------------------------------------------------
# Gromov products
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GromovRecord:
    z: np.ndarray
    w: np.ndarray
    o: np.ndarray
    value: float
    source: str  # "oracle" or "bracket"
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower


def gromov_product(D: Domain, z, w, o, source: str = "auto", cfg: Optional[SolverConfig] = None) -> GromovRecord:
    """Doubled product k(z,o) + k(w,o) - k(z,w).

    With the oracle metric the value is exact (and nonnegative, by the
    triangle inequality); with solver brackets the record carries a certified
    interval built from the matching one-sided bounds.
    """
    z = as_point(z, D.dimension)
    w = as_point(w, D.dimension)
    o = as_point(o, D.dimension)
    if source == "auto":
        source = "oracle" if D.has_closed_form else "bracket"
    if source == "oracle":
        if not D.has_closed_form:
            raise CapabilityError(f"no closed-form metric source for {D.kind}")
        val = model_distance(D, z, o) + model_distance(D, w, o) - model_distance(D, z, w)
        return GromovRecord(z, w, o, val, "oracle", val, val)
    cfg = cfg or SolverConfig()
    lo_zo, _ = caratheodory_lower(D, z, o, cfg)
    lo_wo, _ = caratheodory_lower(D, w, o, cfg)
    up_zo, _ = lempert_upper(D, z, o, cfg)
    up_wo, _ = lempert_upper(D, w, o, cfg)
    lo_zw, _ = caratheodory_lower(D, z, w, cfg)
    up_zw, _ = lempert_upper(D, z, w, cfg)
    lower = lo_zo + lo_wo - up_zw
    upper = up_zo + up_wo - lo_zw
    return GromovRecord(z, w, o, 0.5 * (lower + upper), "bracket", lower, upper)


# ---------------------------------------------------------------------------
# complex geodesics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComplexGeodesicDisc:
    disc: AnalyticDisc
    defect: float
    tolerance: float
    accepted: bool
    star_normalized: bool = False
    meta: dict = field(default_factory=dict)


def _disc_pair_grid(count_r: int = 4, count_a: int = 6, rho_max: float = 0.9):
    pts = [0.0 + 0.0j]
    for r in np.linspace(rho_max / count_r, rho_max, count_r):
        for a in np.linspace(0, 2 * np.pi, count_a, endpoint=False):
            pts.append(r * np.exp(1j * a))
    pts = np.array(pts)
    pairs = []
    for i in range(0, len(pts), 2):
        for j in range(i + 1, len(pts), 3):
            pairs.append((pts[i], pts[j]))
    return pairs


def verify_complex_geodesic(
    D: Domain,
    disc: AnalyticDisc,
    cfg: Optional[SolverConfig] = None,
    tol: float = GEODESIC_TOL,
    pair_grid=None,
) -> ComplexGeodesicDisc:
    """Check the isometry identity of a disc on a grid of parameter pairs.

    The defect is max |k_disc(zeta, eta) - k_D(phi(zeta), phi(eta))| with the
    domain distance taken from the closed form when available, else measured
    against the certified sandwich bracket (defect = distance outside it).
    """
    cfg = cfg or SolverConfig()
    pairs = pair_grid if pair_grid is not None else _disc_pair_grid()
    defect = 0.0
    used = 0
    skipped = 0
    for zeta, eta in pairs:
        pz = disc(zeta)
        pw = disc(eta)
        if not (D.contains(pz) and D.contains(pw)):
            skipped += 1
            continue
        k_param = poincare_distance(complex(zeta), complex(eta))
        if D.has_closed_form:
            k_dom = model_distance(D, pz, pw)
            gap = abs(k_param - k_dom)
        else:
            if min(D.boundary_distance(pz), D.boundary_distance(pw)) < cfg.min_boundary_distance:
                skipped += 1
                continue
            try:
                lo, _ = caratheodory_lower(D, pz, pw, cfg)
                up, _ = lempert_upper(D, pz, pw, cfg)
            except SolverFailure:
                skipped += 1
                continue
            gap = max(lo - k_param, k_param - up, 0.0)
        defect = max(defect, gap)
        used += 1
    return ComplexGeodesicDisc(
        disc=disc,
        defect=defect,
        tolerance=tol,
        accepted=defect <= tol and used > 0,
        meta={"pairs_used": used, "pairs_skipped": skipped},
    )


def complex_geodesic(D: Domain, z, w, cfg: Optional[SolverConfig] = None, tol: float = GEODESIC_TOL) -> ComplexGeodesicDisc:
    """Solve for an extremal disc through the pair and verify it is a geodesic.

    On convex domains extremal discs are geodesics, so an accepted record is
    expected; a defect above tolerance raises GeodesicRejection with the
    diagnostics attached.
    """
    if not D.is_convex and not isinstance(D, Annulus):
        raise CapabilityError("complex geodesics are constructed on convex models (or the annulus)")
    cfg = cfg or SolverConfig()
    val, disc = lempert_upper(D, z, w, cfg)
    rec = verify_complex_geodesic(D, disc, cfg, tol)
    rec.meta["value"] = val
    if not rec.accepted:
        raise GeodesicRejection(
            f"isometry defect {rec.defect:.3e} exceeds tolerance {tol:.1e}", record=rec
        )
    return rec


def normalize_star(g: ComplexGeodesicDisc, D: Domain, grid: int = 24, refine: int = 40) -> ComplexGeodesicDisc:
    """Recenter the disc so its basepoint maximizes the boundary distance.

    The maximizing parameter is found on a polar grid with local refinement
    and the disc is precomposed with the automorphism sending 0 there; ties
    break toward the smallest recentering.
    """
    if not g.accepted:
        raise ValueError("normalize_star expects an accepted geodesic")
    disc = g.disc

    def depth(zeta):
        p = disc(zeta)
        if not D.contains(p):
            return -1.0
        return D.boundary_distance(p)

    best = (depth(0.0), 0.0, 0.0 + 0.0j)
    for r in np.linspace(0.05, 0.995, grid):
        for a in np.linspace(0, 2 * np.pi, grid, endpoint=False):
            zeta = r * np.exp(1j * a)
            d = depth(zeta)
            if d > best[0] + 1e-15 or (abs(d - best[0]) <= 1e-15 and abs(zeta) < abs(best[2])):
                best = (d, r, zeta)
    zeta_star = complex(best[2])
    step = 0.5 / grid
    for _ in range(refine):
        improved = False
        for dz in (step, step * 1j, -step, -step * 1j):
            cand = zeta_star + dz
            if abs(cand) >= 0.999:
                continue
            if depth(cand) > depth(zeta_star) + 1e-14:
                zeta_star = cand
                improved = True
        if not improved:
            step *= 0.5
            if step < 1e-9:
                break
    if abs(zeta_star) < 1e-12:
        meta = dict(g.meta)
        meta["star_center"] = [0.0, 0.0]
        return ComplexGeodesicDisc(
            disc=disc, defect=g.defect, tolerance=g.tolerance, accepted=True,
            star_normalized=True, meta=meta,
        )
    a_old, w_old = disc.center, disc.rotation
    a_new = (w_old * zeta_star + a_old) / (1.0 + np.conj(a_old) * w_old * zeta_star)
    dpsi = (w_old * (1 - abs(a_old) ** 2) / (1 + np.conj(a_old) * w_old * zeta_star) ** 2) * (1 - abs(zeta_star) ** 2)
    w_new = dpsi / (1.0 - abs(a_new) ** 2)
    w_new = w_new / abs(w_new)
    new_disc = AnalyticDisc(
        coeffs=disc.coeffs,
        center=complex(a_new),
        rotation=complex(w_new),
        scale=disc.scale,
        boundary_samples=disc.boundary_samples,
        exp_wrap=disc.exp_wrap,
    )
    meta = dict(g.meta)
    meta["star_center"] = [zeta_star.real, zeta_star.imag]
    return ComplexGeodesicDisc(
        disc=new_disc, defect=g.defect, tolerance=g.tolerance, accepted=True,
        star_normalized=True, meta=meta,
    )


# ---------------------------------------------------------------------------
# real geodesics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RealGeodesicPath:
    nodes: np.ndarray  # (P, n) points along the path
    params: np.ndarray  # (P,) arc-length parameters in the tanh-inverse scale
    defect: float
    meta: dict = field(default_factory=dict)


def real_geodesic(D: Domain, z, w, cfg: Optional[SolverConfig] = None, samples: int = 17) -> RealGeodesicPath:
    """Arc-length parameterized geodesic path joining the pair.

    Convex domains use the trace of a complex geodesic restricted to the
    hyperbolic segment between the preimages; the annulus uses the covering
    geodesic.  The defect is the worst deviation of pairwise distances from
    parameter differences over all node pairs.
    """
    z = as_point(z, D.dimension)
    w = as_point(w, D.dimension)
    cfg = cfg or SolverConfig()
    if isinstance(D, Annulus):
        from .closed_forms import annulus_geodesic

        dense = annulus_geodesic(complex(z[0]), complex(w[0]), D.inner_radius, np.linspace(0, 1, 512))
        lens = np.zeros(len(dense))
        for i in range(1, len(dense)):
            lens[i] = lens[i - 1] + model_distance(D, [dense[i - 1]], [dense[i]])
        targets = np.linspace(0, lens[-1], samples)
        idx = np.searchsorted(lens, targets)
        idx[-1] = len(dense) - 1
        nodes = dense[idx][:, None]
        params = lens[idx]
    elif D.is_convex:
        rec = complex_geodesic(D, z, w, cfg)
        disc = rec.disc
        total = rec.meta["value"]
        ts = np.linspace(0.0, total, samples)
        nodes = np.array([disc(math.tanh(t)) for t in ts])
        params = ts
    else:
        raise CapabilityError(f"no real-geodesic construction for {D.kind}")
    defect = 0.0
    if D.has_closed_form:
        for i in range(len(params)):
            for j in range(i + 1, len(params)):
                k = model_distance(D, nodes[i], nodes[j])
                defect = max(defect, abs(k - abs(params[i] - params[j])))
    else:
        for i in range(0, len(params), max(1, len(params) // 6)):
            for j in range(i + 1, len(params), max(1, len(params) // 6)):
                lo, _ = caratheodory_lower(D, nodes[i], nodes[j], cfg)
                up, _ = lempert_upper(D, nodes[i], nodes[j], cfg)
                gap = abs(params[i] - params[j])
                defect = max(defect, max(lo - gap, gap - up, 0.0))
    return RealGeodesicPath(nodes=nodes, params=params, defect=defect)


# ---------------------------------------------------------------------------
# visibility and strong completeness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SequenceProbe:
    p: np.ndarray
    q: np.ndarray
    deltas: np.ndarray
    values: np.ndarray
    slope: float
    divergent: bool
    verdict: str
    sup: float
    inconclusive: bool = False


def _tail_slope(xs: np.ndarray, ys: np.ndarray) -> float:
    half = len(xs) // 2
    return float(np.polyfit(xs[half:], ys[half:], 1)[0])


def _approach(D: Domain, p: np.ndarray, delta: float) -> np.ndarray:
    nu = D.boundary_normal(p)
    return p - delta * nu


def visibility_classify(
    D: Domain,
    boundary_pairs,
    o=None,
    levels: int = 14,
    delta0: float = 0.1,
    source: str = "auto",
    cfg: Optional[SolverConfig] = None,
    bracket_limit: float = 0.1,
):
    """Gromov-product growth along inward sequences toward boundary pairs.

    A pair whose doubled product grows with slope above the threshold in
    log(1/delta) is a divergent (not-visible) witness; bounded verdicts for
    all sampled pairs are visibility evidence.
    """
    o = D.basepoint() if o is None else as_point(o, D.dimension)
    probes = []
    for p, q in boundary_pairs:
        p = as_point(p, D.dimension)
        q = as_point(q, D.dimension)
        deltas = delta0 * 0.5 ** np.arange(levels)
        vals = []
        inconclusive = False
        for d in deltas:
            zj = _approach(D, p, d)
            wj = _approach(D, q, d)
            rec = gromov_product(D, zj, wj, o, source=source, cfg=cfg)
            if rec.source == "bracket" and rec.width > bracket_limit:
                inconclusive = True
            vals.append(rec.value)
        vals = np.array(vals)
        slope = _tail_slope(np.log(1.0 / deltas), vals)
        divergent = bool(slope > VISIBILITY_SLOPE) and not inconclusive
        verdict = "inconclusive" if inconclusive else ("divergent" if divergent else "bounded")
        probes.append(
            SequenceProbe(
                p=p, q=q, deltas=deltas, values=vals, slope=slope,
                divergent=divergent, verdict=verdict, sup=float(np.max(vals)),
                inconclusive=inconclusive,
            )
        )
    witnesses = [pr for pr in probes if pr.divergent]
    overall = "not-visible" if witnesses else (
        "inconclusive" if any(pr.inconclusive for pr in probes) else "visible-evidence"
    )
    return {"overall": overall, "witnesses": witnesses, "probes": probes}


def strong_completeness_probe(
    D: Domain,
    p,
    pattern: str = "radial",
    levels: int = 20,
    delta0: float = 0.1,
    o=None,
    source: str = "auto",
    cfg: Optional[SolverConfig] = None,
):
    """Gromov-product divergence as both sequence arguments approach one point.

    Radial sequences use z_j = w_j; the split pattern sends the second
    sequence in at twice the rate, which keeps their mutual distance bounded
    while both basepoint terms grow.
    """
    p = as_point(p, D.dimension)
    o = D.basepoint() if o is None else as_point(o, D.dimension)
    deltas = delta0 * 0.5 ** np.arange(levels)
    vals = []
    for d in deltas:
        zj = _approach(D, p, d)
        if pattern == "radial":
            wj = zj
        elif pattern == "split":
            wj = _approach(D, p, 2 * d)
        else:
            raise ValueError(f"unknown pattern {pattern}")
        rec = gromov_product(D, zj, wj, o, source=source, cfg=cfg)
        vals.append(rec.value)
    vals = np.array(vals)
    slope = _tail_slope(np.log(1.0 / deltas), vals)
    return {
        "divergent": bool(slope >= COMPLETENESS_SLOPE),
        "slope": slope,
        "deltas": deltas,
        "values": vals,
    }


# ---------------------------------------------------------------------------
# equicontinuity and boundary extension
# ---------------------------------------------------------------------------


def equicontinuity_modulus(family, t_levels=None, grid: int = 10):
    """Modulus omega(t) = sup over the family of |phi(a) - phi(b)|, |a-b| <= t.

    Evaluated on a closed-disc polar grid.  The family is judged uniform
    when the modulus decays with a positive fitted power as t -> 0 and the
    half-family modulus stays comparable (doubling stability).
    """
    if not family:
        raise ValueError("empty family")
    for g in family:
        if not g.star_normalized:
            raise ValueError("equicontinuity expects star-normalized geodesics")
    t_levels = np.array(t_levels if t_levels is not None else np.geomspace(0.02, 1.0, 8))
    pts = [0.0 + 0.0j]
    for r in np.linspace(1.0 / grid, 1.0, grid):
        for a in np.linspace(0, 2 * np.pi, 2 * grid, endpoint=False):
            pts.append(r * np.exp(1j * a))
    pts = np.array(pts)
    seps = np.abs(pts[:, None] - pts[None, :])
    omega_full = np.zeros(t_levels.size)
    omega_half = np.zeros(t_levels.size)
    half = max(1, len(family) // 2)
    for idx, g in enumerate(family):
        vals = g.disc(pts)
        diff = np.linalg.norm(vals[:, None, :] - vals[None, :, :], axis=-1)
        for i, t in enumerate(t_levels):
            m = float(np.max(diff[seps <= t])) if np.any(seps <= t) else 0.0
            omega_full[i] = max(omega_full[i], m)
            if idx < half:
                omega_half[i] = max(omega_half[i], m)
    pos = omega_full > 0
    slope = float(np.polyfit(np.log(t_levels[pos]), np.log(omega_full[pos]), 1)[0]) if np.sum(pos) >= 2 else 0.0
    doubling = float(np.max(omega_full[pos] / np.maximum(omega_half[pos], 1e-300))) if np.any(pos) else 1.0
    uniform = slope > 0.2 and doubling < 4.0
    return {
        "levels": t_levels,
        "omega": omega_full,
        "omega_half_family": omega_half,
        "slope": slope,
        "doubling": doubling,
        "uniform": bool(uniform),
    }


def boundary_extension_check(g, targets, levels: int = 22, angles: int = 512):
    """Continuity of the radial extension and proximity to boundary targets.

    Polynomial (and exp-wrapped polynomial) discs extend continuously to the
    closed disc by construction; the check reports the worst oscillation of
    phi along radii near the boundary and the distance from the boundary
    image to each target.
    """
    disc = g.disc if isinstance(g, ComplexGeodesicDisc) else g
    th = np.linspace(0, 2 * np.pi, angles, endpoint=False)
    th = np.concatenate([th, [0.0, np.pi]])  # the normal-form endpoints
    boundary_vals = disc(np.exp(1j * th))
    radii = 1.0 - 0.5 ** np.arange(1, levels + 1)
    tail = radii[-4:]
    osc = 0.0
    for r in tail:
        vals = disc(r * np.exp(1j * th))
        osc = max(osc, float(np.max(np.linalg.norm(vals - boundary_vals, axis=-1))))
    hits = []
    for target in targets:
        target = as_point(target, disc.dimension)
        dist = float(np.min(np.linalg.norm(boundary_vals - target[None, :], axis=-1)))
        hits.append(dist)
    return {"target_distances": hits, "radial_oscillation": osc}
