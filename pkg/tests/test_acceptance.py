"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with the measured quantities at its stated tolerance."""

import json
import math
import time

import numpy as np

from invmet.bounds import LocalizationSetup, check_localization
from invmet.cli import run_config, validate_summary
from invmet.closed_forms import disc_gromov_lower, model_distance, poincare_distance
from invmet.domains import (
    Annulus,
    Ball,
    ComplexEllipsoid,
    Polydisc,
    UnitDisc,
    Window,
    disc_free_certificate,
    sample_pair_near,
)
from invmet.extremal import (
    AnalyticDisc,
    SolverConfig,
    caratheodory_lower,
    kobayashi_distance_upper,
    lempert_upper,
    sandwich,
)
from invmet.geodesics import (
    ComplexGeodesicDisc,
    boundary_extension_check,
    normalize_star,
    strong_completeness_probe,
    verify_complex_geodesic,
    visibility_classify,
)

DISC = UnitDisc()
BALL = Ball(center=[0, 0], radius=1.0)
POLY = Polydisc([1.0, 1.0])
ELL = ComplexEllipsoid([1.0, 2.0])
ANN = Annulus(0.3)

FAST = SolverConfig(restarts=3, maxiter=50)


def _pass(num, detail):
    print(f"PASS criterion {num}: {detail}")


def test_criterion_01_disc_oracle_equivalence():
    t0 = time.monotonic()
    worst_up = worst_lo = 0.0
    for i in range(100):
        z, w = sample_pair_near(DISC, None, 0.05, 0.95, seed=1000 + i)
        oracle = model_distance(DISC, z, w)
        up, _ = lempert_upper(DISC, z, w, FAST)
        lo, _ = caratheodory_lower(DISC, z, w, FAST)
        assert up >= oracle - 1e-12, "upper bound must sit above the oracle"
        assert lo <= oracle + 1e-12, "lower bound must sit below the oracle"
        worst_up = max(worst_up, up - oracle)
        worst_lo = max(worst_lo, oracle - lo)
    elapsed = time.monotonic() - t0
    assert worst_up <= 1e-3, f"Lempert error {worst_up:.2e} exceeds 1e-3"
    assert worst_lo <= 1e-3, f"Caratheodory error {worst_lo:.2e} exceeds 1e-3"
    assert elapsed < 120.0, f"runtime {elapsed:.1f}s exceeds 2 minutes"
    _pass(1, f"100 disc pairs, lempert err {worst_up:.2e}, carath err {worst_lo:.2e}, {elapsed:.1f}s")


def test_criterion_02_ball_lempert_equality():
    worst = 0.0
    for i in range(100):
        z, w = sample_pair_near(BALL, None, 0.05, 0.95, seed=2000 + i)
        br = sandwich(BALL, z, w, FAST)
        assert br.lower <= br.upper + 1e-12
        worst = max(worst, br.width)
    assert worst <= 1e-2, f"bracket width {worst:.2e} exceeds 1e-2"
    _pass(2, f"100 ball pairs, max sandwich width {worst:.2e} <= 1e-2")


def test_criterion_03_chain_inequality():
    cases = [
        (DISC, 130, 0.05, 0.9),
        (BALL, 120, 0.05, 0.9),
        (POLY, 120, 0.05, 0.9),
        (ELL, 40, 0.06, 0.5),
        (ANN, 120, 0.08, 0.32),
    ]
    kcfg = SolverConfig(restarts=2, maxiter=40, path_nodes=4, node_moves=False)
    total = 0
    violations = 0
    for D, count, dmin, dmax in cases:
        base = 3000 + (101 * hash(D.kind)) % 997
        for i in range(count):
            z, w = sample_pair_near(D, None, dmin, dmax, seed=base + i)
            lo, _ = caratheodory_lower(D, z, w, FAST)
            up, _ = lempert_upper(D, z, w, FAST)
            if D.has_closed_form:
                k = model_distance(D, z, w)
                tol_lo = tol_hi = 1e-9
            else:
                kb = kobayashi_distance_upper(D, z, w, kcfg)
                k = kb.value
                tol_lo = 1e-9
                # two independent upper bounds: allow the declared
                # discretization error plus a fixed integration slack
                tol_hi = kb.error_estimate + 8e-2
            total += 1
            if lo > k + tol_lo or k > up + tol_hi:
                violations += 1
    assert total >= 500, f"need at least 500 sampled pairs, got {total}"
    assert violations == 0, f"{violations} chain violations beyond combined tolerance"
    _pass(3, f"c <= k <= l on {total} pairs across 5 models, zero violations")


def test_criterion_04_theorem_global_annulus(tmp_path):
    # the criterion covers the two distance inequalities over 200 pairs;
    # the infinitesimal report is exercised separately in the bounds tests
    cfg = {
        "task": "theorem1",
        "domain": {"kind": "annulus", "params": {"inner_radius": 0.3}},
        "samples": 200,
        "tangent_samples": 0,
        "delta_min": 0.06,
        "delta_max": 0.33,
        "seed": 414,
        "solver": {"degree": 8, "boundary_samples": 96, "restarts": 2, "tol": 1e-6, "seed": 0, "maxiter": 40},
    }
    code = run_config(cfg, tmp_path, quiet=True)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert validate_summary(summary) == []
    ratio = summary["results"]["ratio"]
    gap = summary["results"]["gap"]
    for name, rep in (("ratio", ratio), ("gap", gap)):
        assert math.isfinite(rep["constant"]), f"{name} constant not finite"
        assert rep["stability"] <= 1.5, f"{name} stability {rep['stability']:.2f} exceeds 1.5"
        assert rep["unboundable"] == 0
    assert code == 0, f"exit code {code} != 0"
    _pass(
        4,
        "annulus 200 pairs: ratio C=%.3g (stab %.2f), gap C=%.3g (stab %.2f), exit 0"
        % (ratio["constant"], ratio["stability"], gap["constant"], gap["stability"]),
    )


def test_criterion_05_localization_ball():
    setup = LocalizationSetup(
        domain=BALL,
        boundary_point=[1.0, 0.0],
        window=Window(center=[1.0, 0.0], r_outer=0.5, r_inner=0.25),
        cfg=SolverConfig(restarts=2, maxiter=40, path_nodes=4, node_moves=False, boundary_samples=96),
    )
    pairs = []
    s = 0
    while len(pairs) < 100 and s < 20000:
        z, w = sample_pair_near(BALL, [1.0, 0.0], 0.012, 0.1, seed=5000 + s)
        s += 1
        if setup.inner_contains(z) and setup.inner_contains(w):
            pairs.append((z, w))
    assert len(pairs) == 100
    rng = np.random.default_rng(55)
    tangents = []
    t = 0
    while len(tangents) < 40 and t < 20000:
        z, _ = sample_pair_near(BALL, [1.0, 0.0], 0.012, 0.1, seed=6000 + t)
        t += 1
        if setup.inner_contains(z):
            from invmet.domains import Tangent

            tangents.append(Tangent(z, rng.normal(size=4).view(np.complex128)))
    reports = check_localization(setup, pairs, tangents, seed=0)
    details = []
    for key in ("ratio", "gap", "metric"):
        rep = reports[key]
        assert math.isfinite(rep.constant), f"{key} constant not finite"
        assert rep.stability <= 1.5, f"{key} stability {rep.stability:.2f} exceeds 1.5"
        details.append(f"{key} C={rep.constant:.3g} stab={rep.stability:.2f}")
    for key in ("sqrt_gap", "metric_linear"):
        rep = reports[key]
        assert math.isfinite(rep.constant), f"weak variant {key} constant not finite"
        assert rep.unboundable == 0
        details.append(f"{key} C={rep.constant:.3g}")
    _pass(5, "ball window suite on 100 pairs: " + "; ".join(details))


def test_criterion_06_exact_zero_constant_checks():
    worst_low = math.inf
    for D, base_seed in ((BALL, 7000), (POLY, 8000)):
        for i in range(500):
            z, w = sample_pair_near(D, None, 0.01, 0.9, seed=base_seed + i)
            k = model_distance(D, z, w)
            dz, dw = D.boundary_distance(z), D.boundary_distance(w)
            margin = k - 0.5 * abs(math.log(dz / dw))
            worst_low = min(worst_low, margin)
    assert worst_low >= -1e-9, f"log lower bound margin {worst_low:.2e} below -1e-9"
    rng = np.random.default_rng(99)
    pts = DISC.sample_interior(20000, rng)[:, 0]
    worst_grom = math.inf
    for i in range(0, 20000, 2):
        z, w = complex(pts[i]), complex(pts[i + 1])
        worst_grom = min(worst_grom, poincare_distance(z, w) - disc_gromov_lower(z, w))
    assert worst_grom >= -1e-12, f"disc product lower bound margin {worst_grom:.2e}"
    _pass(6, f"log-lower margin {worst_low:.2e} on 1000 pairs; product bound margin {worst_grom:.2e} on 10^4 pairs")


def test_criterion_07_visibility_dichotomy():
    out = visibility_classify(POLY, [([1, 0.2], [1, -0.2])])
    probe = out["probes"][0]
    assert out["overall"] == "not-visible"
    r = 1 - probe.deltas
    half = len(r) // 2
    slope = float(np.polyfit(np.arctanh(r[half:]), probe.values[half:], 1)[0])
    assert slope >= 1.8, f"witness growth slope {slope:.2f} below 1.8"
    rng = np.random.default_rng(77)
    pairs = []
    while len(pairs) < 20:
        p = rng.normal(size=4).view(np.complex128)
        p /= np.linalg.norm(p)
        t = rng.normal(size=4).view(np.complex128)
        q = -p + 0.45 * t
        q /= np.linalg.norm(q)
        if np.linalg.norm(p - q) >= 1.2:
            pairs.append((p, q))
    ball_out = visibility_classify(BALL, pairs)
    sups = [pr.sup for pr in ball_out["probes"]]
    assert ball_out["overall"] == "visible-evidence"
    assert max(sups) <= 1.0, f"ball product sup {max(sups):.3f} exceeds 1.0"
    assert disc_free_certificate(POLY).found, "polydisc boundary must contain a disc"
    assert not disc_free_certificate(BALL).found, "ball boundary must be disc-free"
    _pass(7, f"polydisc witness slope {slope:.2f} >= 1.8; ball sup {max(sups):.3f} <= 1.0 over 20 pairs")


def test_criterion_08_strong_completeness():
    t0 = time.monotonic()
    d = strong_completeness_probe(DISC, [1.0], "radial", levels=20, delta0=2.0**-1)
    b = strong_completeness_probe(BALL, [1.0, 0.0], "radial", levels=20, delta0=2.0**-1)
    elapsed = time.monotonic() - t0
    for name, probe in (("disc", d), ("ball", b)):
        assert probe["divergent"], f"{name} probe not divergent"
        assert abs(probe["slope"] - 1.0) <= 0.2, f"{name} slope {probe['slope']:.3f} off 1.0 by > 20%"
        assert probe["deltas"][-1] <= 2.0**-20
    assert elapsed < 10.0, f"runtime {elapsed:.2f}s exceeds 10s"
    _pass(8, f"radial slopes disc {d['slope']:.3f}, ball {b['slope']:.3f}; {elapsed:.2f}s")


def test_criterion_09_geodesic_verification():
    slice_disc = AnalyticDisc(coeffs=np.array([[0, 0], [1, 0]], dtype=complex))
    diag = AnalyticDisc(coeffs=np.array([[0, 0], [1, 0.5]], dtype=complex))
    r1 = verify_complex_geodesic(BALL, slice_disc)
    r2 = verify_complex_geodesic(POLY, diag)
    assert r1.defect <= 1e-6, f"ball slice defect {r1.defect:.2e}"
    assert r2.defect <= 1e-6, f"polydisc diagonal defect {r2.defect:.2e}"
    moved = ComplexGeodesicDisc(
        disc=AnalyticDisc(coeffs=np.array([[0.0], [1.0]], dtype=complex), center=0.4),
        defect=0.0, tolerance=1e-9, accepted=True,
    )
    once = normalize_star(moved, DISC)
    twice = normalize_star(once, DISC)
    drift = math.hypot(*twice.meta["star_center"])
    assert drift <= 1e-6, f"second normalization recentered by {drift:.2e}"
    hits = []
    for disc, targets in (
        (slice_disc, [[1, 0], [-1, 0]]),
        (AnalyticDisc(coeffs=np.array([[0.0], [1.0]], dtype=complex)), [[1.0], [-1.0]]),
        (diag, [[1, 0.5], [-1, -0.5]]),
    ):
        out = boundary_extension_check(disc, targets)
        hits.append(max(out["target_distances"]))
    assert max(hits) <= 1e-12, f"boundary targets missed by {max(hits):.2e}"
    _pass(
        9,
        f"defects {r1.defect:.1e}/{r2.defect:.1e}; star drift {drift:.1e}; extension hit error {max(hits):.1e}",
    )


def test_criterion_10_determinism(tmp_path):
    cfg = {
        "task": "sandwich",
        "domain": {"kind": "ball", "params": {"center": [[0, 0], [0, 0]], "radius": 1.0}},
        "samples": 4,
        "delta_min": 0.1,
        "delta_max": 0.6,
        "seed": 1234,
        "solver": {"degree": 4, "boundary_samples": 64, "restarts": 2, "tol": 1e-6, "seed": 0},
    }
    run_config(cfg, tmp_path / "a", quiet=True, threads=1)
    run_config(cfg, tmp_path / "b", quiet=True, threads=4)
    a = (tmp_path / "a" / "sandwich.csv").read_bytes()
    b = (tmp_path / "b" / "sandwich.csv").read_bytes()
    assert a == b, "same seed must reproduce byte-identical CSV"
    vis = {
        "task": "visibility",
        "domain": {"kind": "polydisc", "params": {"radii": [1.0, 1.0]}},
        "boundary_pairs": [[[[1, 0], [0.2, 0]], [[1, 0], [-0.2, 0]]]],
        "levels": 10,
        "seed": 5,
    }
    run_config(vis, tmp_path / "c", quiet=True)
    run_config(vis, tmp_path / "d", quiet=True)
    assert (tmp_path / "c" / "visibility.csv").read_bytes() == (tmp_path / "d" / "visibility.csv").read_bytes()
    _pass(10, "re-runs reproduce byte-identical CSV output (sandwich x2 threads, visibility)")
