"""Comparison-function evaluation and empirical inequality suites.

Each suite evaluates one family of distance/metric inequalities on sampled
pairs, always combining bounds in the violation-safe direction: the left
side uses certified upper bounds and the right side certified lower bounds,
so a fitted constant over-estimates the true one and reported compliance is
sound even under solver error.  Fitted constants are sups over rows, never
regressions, because the statements being probed are uniform bounds; the
declared falsification signal is the half-sample stability ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .closed_forms import model_distance, model_metric
from .domains import Ball, Domain, Intersection, UnitDisc, Window, as_point
from .errors import SetupError, SolverFailure
from .extremal import (
    SolverConfig,
    caratheodory_lower,
    caratheodory_metric_lower,
    kobayashi_distance_upper,
    kobayashi_metric_upper,
    lempert_upper,
)


def h_eval(x: float) -> float:
    """x (1 + x) / log(1 + x), extended by its limit 1 at x = 0+.

    Increasing on (0, inf); small arguments use the series of
    log(1+x)/x to avoid the 0/0 form.
    """
    if x <= 0:
        raise ValueError("h is defined for positive arguments")
    if x < 1e-4:
        q = 1.0 - x / 2.0 + x * x / 3.0 - x**3 / 4.0 + x**4 / 5.0
        return (1.0 + x) / q
    return x * (1.0 + x) / math.log1p(x)


def f_bound(D: Domain, z, w) -> float:
    """delta(z) delta(w) h(|z-w| / sqrt(delta(z) delta(w))).

    For z = w the h factor degenerates to its limit 1 and the product of
    boundary distances is returned.
    """
    z = as_point(z, D.dimension)
    w = as_point(w, D.dimension)
    dz = D.boundary_distance(z)
    dw = D.boundary_distance(w)
    sep = float(np.linalg.norm(z - w))
    if sep == 0.0:
        return dz * dw
    return dz * dw * h_eval(sep / math.sqrt(dz * dw))


def g_bound(D: Domain, z, w) -> float:
    """|z-w| (|z-w| + sqrt(delta(z) delta(w))); symmetric, zero iff z = w."""
    z = as_point(z, D.dimension)
    w = as_point(w, D.dimension)
    dz = D.boundary_distance(z)
    dw = D.boundary_distance(w)
    sep = float(np.linalg.norm(z - w))
    return sep * (sep + math.sqrt(dz * dw))


# ---------------------------------------------------------------------------
# constant fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    constant: float
    stability: float  # C(full) / C(random half); ~1 means stable
    unboundable: int  # rows with nonpositive shape but positive lhs


def fit_constant(rows, form: str = "difference", seed: int = 0) -> FitResult:
    """Sup of the per-row required constants.

    rows: iterable of (lhs, shape).  Difference form fits lhs <= C * shape;
    ratio form fits lhs <= 1 + C * shape.  Rows whose shape vanishes while
    the (adjusted) lhs stays positive are counted as unboundable.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("fit_constant needs at least one row")
    req = []
    unboundable = 0
    for lhs, shape in rows:
        top = lhs - 1.0 if form == "ratio" else lhs
        if shape <= 0:
            if top > 1e-12:
                unboundable += 1
            continue
        req.append(max(top / shape, 0.0))
    if not req:
        return FitResult(0.0, 1.0, unboundable)
    c_full = max(req)
    rng = np.random.default_rng(seed)
    half = rng.choice(len(req), size=max(1, len(req) // 2), replace=False)
    c_half = max(req[i] for i in half)
    stability = c_full / c_half if c_half > 0 else (1.0 if c_full == 0 else math.inf)
    return FitResult(c_full, stability, unboundable)


@dataclass
class ComparisonRow:
    z: np.ndarray
    w: Optional[np.ndarray]
    lhs: float
    shape: float
    delta_z: float
    delta_w: float
    extra: dict = field(default_factory=dict)


@dataclass
class ComparisonReport:
    inequality: str
    rows: list
    constant: float
    stability: float
    dropped: int = 0
    unboundable: int = 0
    extras: dict = field(default_factory=dict)

    def to_summary(self) -> dict:
        out = {
            "inequality": self.inequality,
            "constant": self.constant,
            "stability": self.stability,
            "rows": len(self.rows),
            "dropped": self.dropped,
            "unboundable": self.unboundable,
        }
        out.update({k: v for k, v in self.extras.items() if isinstance(v, (int, float, str, bool))})
        return out


def _report(name, rows, form, dropped=0, seed=0, extras=None) -> ComparisonReport:
    fit = fit_constant([(r.lhs, r.shape) for r in rows], form=form, seed=seed) if rows else FitResult(0.0, 1.0, 0)
    return ComparisonReport(
        inequality=name,
        rows=rows,
        constant=fit.constant,
        stability=fit.stability,
        dropped=dropped,
        unboundable=fit.unboundable,
        extras=extras or {},
    )


# ---------------------------------------------------------------------------
# global two-sided suite: Lempert upper vs Caratheodory lower
# ---------------------------------------------------------------------------


def check_theorem_global(
    D: Domain,
    pairs,
    tangents=(),
    cfg: Optional[SolverConfig] = None,
    seed: int = 0,
) -> dict:
    """Ratio and gap bounds between the Lempert and Caratheodory distances.

    Returns reports keyed "ratio" (l/c <= 1 + C f), "gap" (l - c <= C g) and
    "metric" (kappa <= (1 + C delta^2 |X|) gamma, with the linear-in-delta
    weak form fitted alongside).
    """
    cfg = cfg or SolverConfig()
    ratio_rows, gap_rows = [], []
    dropped = 0
    for z, w in pairs:
        z = as_point(z, D.dimension)
        w = as_point(w, D.dimension)
        try:
            up, _ = lempert_upper(D, z, w, cfg)
            lo, _ = caratheodory_lower(D, z, w, cfg)
        except SolverFailure:
            dropped += 1
            continue
        dz, dw = D.boundary_distance(z), D.boundary_distance(w)
        fv, gv = f_bound(D, z, w), g_bound(D, z, w)
        if lo <= 0:
            dropped += 1
            continue
        ratio_rows.append(ComparisonRow(z, w, up / lo, fv, dz, dw))
        gap_rows.append(ComparisonRow(z, w, up - lo, gv, dz, dw))
    met_rows, met_weak, mdrop = [], [], 0
    for t in tangents:
        try:
            if D.has_closed_form:
                kap = model_metric(D, t)
            else:
                kap, _ = kobayashi_metric_upper(D, t, cfg)
            gam, _ = caratheodory_metric_lower(D, t, cfg)
        except SolverFailure:
            mdrop += 1
            continue
        if gam <= 0:
            mdrop += 1
            continue
        dz = D.boundary_distance(t.base)
        nX = float(np.linalg.norm(t.direction))
        met_rows.append(ComparisonRow(t.base, None, kap / gam, dz * dz * nX, dz, dz))
        met_weak.append(ComparisonRow(t.base, None, kap - gam, dz * nX, dz, dz))
    weak_fit = (
        fit_constant([(r.lhs, r.shape) for r in met_weak], form="difference", seed=seed)
        if met_weak
        else FitResult(0.0, 1.0, 0)
    )
    metric_report = _report(
        "metric_ratio_quadratic", met_rows, "ratio", mdrop, seed,
        extras={
            "weak_constant": weak_fit.constant,
            "weak_stability": weak_fit.stability,
            # the quadratic factor is dimensionless only after pairing with
            # |X|; evaluated verbatim, recorded rather than normalized
            "scale_note": "ratio shape carries delta^2 |X|; gap shape delta |X|",
        },
    )
    return {
        "ratio": _report("lempert_over_caratheodory", ratio_rows, "ratio", dropped, seed),
        "gap": _report("lempert_minus_caratheodory", gap_rows, "difference", dropped, seed),
        "metric": metric_report,
    }


# ---------------------------------------------------------------------------
# localization suite on a boundary window
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalizationSetup:
    domain: Domain
    boundary_point: np.ndarray
    window: Window
    cfg: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        object.__setattr__(self, "boundary_point", as_point(self.boundary_point, self.domain.dimension))
        if float(np.linalg.norm(self.boundary_point - self.window.center)) > 1e-9:
            raise SetupError("window must be centered at the boundary point")

    def localized_domain(self) -> Intersection:
        return Intersection(
            base=self.domain,
            window=Ball(center=self.window.center, radius=self.window.r_outer),
        )

    def inner_contains(self, z) -> bool:
        return float(np.linalg.norm(as_point(z) - self.window.center)) < self.window.r_inner


def check_localization(setup: LocalizationSetup, pairs, tangents=(), seed: int = 0) -> dict:
    """Localized Kobayashi upper bounds against global Caratheodory lower bounds.

    Reports: "ratio" (k_loc/c <= 1 + C f), "gap" (k_loc - c <= C g),
    "metric" (kappa_loc <= (1 + C delta^2) gamma), plus the weaker
    "sqrt_gap" (k_loc - k <= C |z-w|^(1/2)) and "metric_linear"
    (kappa_loc <= (1 + C delta) kappa) variants.
    """
    D = setup.domain
    cfg = setup.cfg
    loc = setup.localized_domain()
    ratio_rows, gap_rows, sqrt_rows = [], [], []
    dropped = 0
    real_ratios = []
    for z, w in pairs:
        z = as_point(z, D.dimension)
        w = as_point(w, D.dimension)
        if not (setup.inner_contains(z) and setup.inner_contains(w)):
            raise SetupError("sampled pair must lie in the inner window")
        try:
            kb = kobayashi_distance_upper(loc, z, w, cfg, metric="solver")
            c_lo, _ = caratheodory_lower(D, z, w, cfg)
        except SolverFailure:
            dropped += 1
            continue
        if c_lo <= 0:
            dropped += 1
            continue
        dz, dw = D.boundary_distance(z), D.boundary_distance(w)
        fv, gv = f_bound(D, z, w), g_bound(D, z, w)
        sep = float(np.linalg.norm(z - w))
        ratio_rows.append(ComparisonRow(z, w, kb.value / c_lo, fv, dz, dw, {"k_err": kb.error_estimate}))
        gap_rows.append(ComparisonRow(z, w, kb.value - c_lo, gv, dz, dw))
        if D.has_closed_form:
            k_global = model_distance(D, z, w)
        else:
            k_global = c_lo
        sqrt_rows.append(ComparisonRow(z, w, kb.value - k_global, math.sqrt(sep), dz, dw))
        if isinstance(D, UnitDisc) and abs(z[0].imag) < 1e-12 and abs(w[0].imag) < 1e-12 and gv > 0:
            lhs_real = max(kb.value - c_lo, 0.0)
            real_ratios.append(lhs_real / gv)
    met_rows, lin_rows, mdrop = [], [], 0
    for t in tangents:
        base = as_point(t.base, D.dimension)
        if not setup.inner_contains(base):
            raise SetupError("sampled tangent must be based in the inner window")
        try:
            kap_loc, _ = kobayashi_metric_upper(loc, t, cfg)
            gam, _ = caratheodory_metric_lower(D, t, cfg)
        except SolverFailure:
            mdrop += 1
            continue
        dz = D.boundary_distance(base)
        if D.has_closed_form:
            kap_global = model_metric(D, t)
        else:
            kap_global, _ = caratheodory_metric_lower(D, t, cfg)
        if gam <= 0 or kap_global <= 0:
            mdrop += 1
            continue
        met_rows.append(ComparisonRow(base, None, kap_loc / gam, dz * dz, dz, dz))
        lin_rows.append(ComparisonRow(base, None, kap_loc / kap_global, dz, dz, dz))
    extras = {}
    if real_ratios:
        # on real disc pairs the gap bound is two-sided: the reverse ratio
        # should stay bounded away from zero
        extras["real_pair_reverse_min_ratio"] = float(min(real_ratios))
        extras["real_pair_count"] = len(real_ratios)
    return {
        "ratio": _report("localized_over_caratheodory", ratio_rows, "ratio", dropped, seed),
        "gap": _report("localized_minus_caratheodory", gap_rows, "difference", dropped, seed, extras),
        "sqrt_gap": _report("localized_minus_global_sqrt", sqrt_rows, "difference", dropped, seed),
        "metric": _report("localized_metric_ratio_quadratic", met_rows, "ratio", mdrop, seed),
        "metric_linear": _report("localized_metric_ratio_linear", lin_rows, "ratio", mdrop, seed),
    }


# ---------------------------------------------------------------------------
# classical bound suite
# ---------------------------------------------------------------------------


def verify_classical(D: Domain, pairs, tangents=(), cfg: Optional[SolverConfig] = None, seed: int = 0) -> dict:
    """Square-root gap, metric gap, log upper/lower and visibility-style bounds.

    Reports keyed: "gap_sqrt", "metric_gap_norm", "log_upper", "log_lower"
    (constant-free, margin must be nonnegative), "visibility_lower" and
    "lempert_log_upper".  Kinds a bound does not apply to are skipped with a
    CapabilityError only when explicitly requested alone.
    """
    cfg = cfg or SolverConfig()
    smooth = D.kind in ("unit_disc", "ball", "annulus")
    out = {}
    sqrt_rows, dini_rows, low_rows, vis_rows, npt_rows = [], [], [], [], []
    dropped = 0
    for z, w in pairs:
        z = as_point(z, D.dimension)
        w = as_point(w, D.dimension)
        dz, dw = D.boundary_distance(z), D.boundary_distance(w)
        sep = float(np.linalg.norm(z - w))
        if sep == 0:
            continue
        try:
            up, _ = lempert_upper(D, z, w, cfg)
            lo, _ = caratheodory_lower(D, z, w, cfg)
        except SolverFailure:
            dropped += 1
            continue
        sqrt_rows.append(ComparisonRow(z, w, up - lo, math.sqrt(sep), dz, dw))
        if D.has_closed_form:
            k = model_distance(D, z, w)
            if smooth:
                s = sep / math.sqrt(dz * dw)
                dini_rows.append(ComparisonRow(z, w, math.expm1(k), s, dz, dw))
            if D.is_convex:
                rhs = 0.5 * abs(math.log(dz / dw))
                low_rows.append(ComparisonRow(z, w, k - rhs, 1.0, dz, dw, {"margin": k - rhs}))
                rhs0 = 0.5 * math.log(1.0 / dz) + 0.5 * math.log(1.0 / dw)
                vis_rows.append(ComparisonRow(z, w, max(rhs0 - k, 0.0), 1.0, dz, dw))
            npt_rows.append(
                ComparisonRow(z, w, max(k - (0.5 * math.log(1 / dz) + 0.5 * math.log(1 / dw)), 0.0), 1.0, dz, dw)
            )
    out["gap_sqrt"] = _report("distance_gap_vs_sqrt_separation", sqrt_rows, "difference", dropped, seed)
    met_rows = []
    mdrop = 0
    for t in tangents:
        nX = float(np.linalg.norm(t.direction))
        if nX == 0:
            continue
        try:
            if D.has_closed_form:
                kap = model_metric(D, t)
            else:
                kap, _ = kobayashi_metric_upper(D, t, cfg)
            gam, _ = caratheodory_metric_lower(D, t, cfg)
        except SolverFailure:
            mdrop += 1
            continue
        met_rows.append(ComparisonRow(as_point(t.base), None, kap - gam, nX, 0.0, 0.0))
    out["metric_gap_norm"] = _report("metric_gap_vs_direction_norm", met_rows, "difference", mdrop, seed)
    if dini_rows:
        out["log_upper"] = _report("distance_log_upper", dini_rows, "difference", 0, seed)
    if low_rows:
        min_margin = min(r.extra["margin"] for r in low_rows)
        out["log_lower"] = _report(
            "distance_log_lower_ratio", [], "difference", 0, seed,
            extras={"min_margin": min_margin, "rows_checked": len(low_rows)},
        )
        out["log_lower"].rows = low_rows
    if vis_rows:
        out["visibility_lower"] = _report("visibility_log_lower", vis_rows, "difference", 0, seed)
    if npt_rows:
        out["lempert_log_upper"] = _report("distance_log_upper_additive", npt_rows, "difference", 0, seed)
    return out
