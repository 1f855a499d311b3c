"""Reproducible experiment runner.

Every task reads a JSON config (seed mandatory, no wall-clock entropy),
writes one CSV per report plus a machine-readable JSON summary, and exits
with a contract code:

    0  all invariant checks passed
    1  configuration error
    2  an inequality suite raised an unstable / unboundable / divergent flag
    3  solver failures above the accepted fraction

Row evaluation is dispatched to a thread pool (--threads, default all
cores); output ordering is by input index, never completion order, so a
fixed seed reproduces byte-identical CSV files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bounds, geodesics
from .closed_forms import model_metric
from .domains import (
    Tangent,
    Window,
    disc_free_certificate,
    domain_from_json,
    m_convexity_probe,
    sample_pair_near,
)
from .errors import InvmetError, SolverFailure
from .extremal import (
    SolverConfig,
    caratheodory_metric_lower,
    kobayashi_metric_upper,
    sandwich,
)

SCHEMA_VERSION = 1
TASKS = (
    "metric",
    "sandwich",
    "theorem1",
    "localize",
    "classical",
    "visibility",
    "completeness",
    "geodesic",
    "mconvex",
)
FAILURE_FRACTION = 0.1


class ConfigError(InvmetError, ValueError):
    pass


def _fmt(x) -> str:
    return repr(float(x))


def _row_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v for v in row))
    path.write_text("\n".join(lines) + "\n")


def _point_cols(prefix: str, n: int):
    cols = []
    for j in range(n):
        cols += [f"{prefix}{j}_re", f"{prefix}{j}_im"]
    return cols


def _point_vals(z):
    out = []
    for c in np.atleast_1d(z):
        out += [float(np.real(c)), float(np.imag(c))]
    return out


def _parallel(fn, items, threads: int):
    if threads <= 1:
        return [fn(i, item) for i, item in enumerate(items)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = [pool.submit(fn, i, item) for i, item in enumerate(items)]
        return [f.result() for f in futs]


def validate_summary(obj) -> list:
    """Minimal validator for the published summary schema; returns errors."""
    errors = []
    if not isinstance(obj, dict):
        return ["summary must be an object"]
    for key in ("schema_version", "task", "seed", "domain", "exit_code", "results"):
        if key not in obj:
            errors.append(f"missing required key {key}")
    if obj.get("schema_version") != SCHEMA_VERSION:
        errors.append("schema_version mismatch")
    if obj.get("task") not in TASKS + ("describe",):
        errors.append(f"unknown task {obj.get('task')}")
    if not isinstance(obj.get("seed"), int) or obj.get("seed", -1) < 0:
        errors.append("seed must be a nonnegative integer")
    if obj.get("exit_code") not in (0, 1, 2, 3):
        errors.append("exit_code out of contract")
    dom = obj.get("domain")
    if not isinstance(dom, dict) or "kind" not in dom:
        errors.append("domain must carry a kind")
    allowed = {
        "schema_version", "task", "seed", "domain", "exit_code", "samples",
        "solver", "results", "flags", "csv_files", "runtime_seconds",
    }
    for key in obj:
        if key not in allowed:
            errors.append(f"unexpected key {key}")
    return errors


# ---------------------------------------------------------------------------
# sampling helpers
# ---------------------------------------------------------------------------


def _sampled_pairs(D, count, seed, delta_min, delta_max, near=None):
    return [
        sample_pair_near(D, near, delta_min, delta_max, seed=_row_seed(seed, i))
        for i in range(count)
    ]


def _sampled_tangents(D, count, seed, delta_min, delta_max):
    out = []
    for i in range(count):
        rng = np.random.default_rng(_row_seed(seed, 10_000 + i))
        z, _ = sample_pair_near(D, None, delta_min, delta_max, seed=_row_seed(seed, 20_000 + i))
        X = rng.normal(size=2 * D.dimension).view(np.complex128)
        out.append(Tangent(z, X))
    return out


def _window_pairs(D, setup, count, seed, delta_min, delta_max):
    pairs = []
    i = 0
    tries = 0
    while len(pairs) < count and tries < 200 * count:
        z, w = sample_pair_near(D, setup.boundary_point, delta_min, delta_max, seed=_row_seed(seed, 30_000 + tries))
        tries += 1
        if setup.inner_contains(z) and setup.inner_contains(w):
            pairs.append((z, w))
            i += 1
    if len(pairs) < count:
        raise ConfigError("could not sample enough pairs inside the inner window")
    return pairs


# ---------------------------------------------------------------------------
# task implementations: each returns (exit_code, results, csv_map, flags)
# ---------------------------------------------------------------------------


def _task_sandwich(D, cfgjson, scfg, seed, threads):
    count = int(cfgjson.get("samples", 20))
    dmin = float(cfgjson.get("delta_min", 0.05))
    dmax = float(cfgjson.get("delta_max", 0.6))
    pairs = _sampled_pairs(D, count, seed, dmin, dmax)

    def work(i, pair):
        z, w = pair
        row_cfg = SolverConfig(**{**scfg.__dict__, "seed": _row_seed(seed, i)})
        try:
            br = sandwich(D, z, w, row_cfg)
            return (z, w, br.lower, br.upper, None)
        except SolverFailure as exc:
            return (z, w, math.nan, math.nan, str(exc))

    results = _parallel(work, pairs, threads)
    n = D.dimension
    rows = []
    widths = []
    failures = 0
    for i, (z, w, lo, up, err) in enumerate(results):
        if err is not None:
            failures += 1
            continue
        widths.append(up - lo)
        rows.append([i] + _point_vals(z) + _point_vals(w) + [lo, up, up - lo])
    header = ["index"] + _point_cols("z", n) + _point_cols("w", n) + ["lower", "upper", "width"]
    res = {
        "pairs": len(rows),
        "failures": failures,
        "max_width": max(widths) if widths else math.nan,
        "mean_width": float(np.mean(widths)) if widths else math.nan,
    }
    code = 3 if failures > FAILURE_FRACTION * count else 0
    return code, res, {"sandwich": (header, rows)}, []


def _task_metric(D, cfgjson, scfg, seed, threads):
    count = int(cfgjson.get("samples", 20))
    dmin = float(cfgjson.get("delta_min", 0.05))
    dmax = float(cfgjson.get("delta_max", 0.6))
    tangents = _sampled_tangents(D, count, seed, dmin, dmax)

    def work(i, t):
        row_cfg = SolverConfig(**{**scfg.__dict__, "seed": _row_seed(seed, i)})
        try:
            up, _ = kobayashi_metric_upper(D, t, row_cfg)
            lo, _ = caratheodory_metric_lower(D, t, row_cfg)
            oracle = model_metric(D, t) if D.has_closed_form else math.nan
            return (t, up, lo, oracle, None)
        except SolverFailure as exc:
            return (t, math.nan, math.nan, math.nan, str(exc))

    results = _parallel(work, tangents, threads)
    n = D.dimension
    rows, failures = [], 0
    gaps = []
    for i, (t, up, lo, oracle, err) in enumerate(results):
        if err is not None:
            failures += 1
            continue
        gaps.append(up - lo)
        rows.append([i] + _point_vals(t.base) + _point_vals(t.direction) + [up, lo, oracle])
    header = ["index"] + _point_cols("z", n) + _point_cols("X", n) + ["kappa_upper", "gamma_lower", "oracle"]
    res = {
        "tangents": len(rows),
        "failures": failures,
        "max_gap": max(gaps) if gaps else math.nan,
    }
    code = 3 if failures > FAILURE_FRACTION * count else 0
    return code, res, {"metric": (header, rows)}, []


def _report_csv(report, n):
    header = (
        ["index"] + _point_cols("z", n) + _point_cols("w", n)
        + ["lhs", "shape", "required_c", "delta_z", "delta_w"]
    )
    rows = []
    for i, r in enumerate(report.rows):
        wvals = _point_vals(r.w) if r.w is not None else [math.nan] * (2 * n)
        shape = r.shape
        req = (r.lhs / shape if shape > 0 else math.nan)
        rows.append([i] + _point_vals(r.z) + wvals + [r.lhs, shape, req, r.delta_z, r.delta_w])
    return header, rows


def _flag_reports(reports, flags, stability_limit=2.0):
    code = 0
    for key, rep in reports.items():
        if rep.unboundable > 0:
            flags.append(f"{rep.inequality}: unboundable rows")
            code = 2
        if rep.stability > stability_limit:
            flags.append(f"{rep.inequality}: unstable constant (ratio {rep.stability:.2f})")
            code = 2
        if not math.isfinite(rep.constant):
            flags.append(f"{rep.inequality}: non-finite constant")
            code = 2
    return code


def _task_theorem1(D, cfgjson, scfg, seed, threads):
    count = int(cfgjson.get("samples", 50))
    dmin = float(cfgjson.get("delta_min", 0.05))
    dmax = float(cfgjson.get("delta_max", 0.4))
    pairs = _sampled_pairs(D, count, seed, dmin, dmax)
    tangents = _sampled_tangents(D, int(cfgjson.get("tangent_samples", count // 2)), seed, dmin, dmax)
    reports = bounds.check_theorem_global(D, pairs, tangents, scfg, seed=seed)
    flags = []
    code = _flag_reports(reports, flags)
    res = {k: rep.to_summary() for k, rep in reports.items()}
    csvs = {f"theorem1_{k}": _report_csv(rep, D.dimension) for k, rep in reports.items()}
    dropped = sum(rep.dropped for rep in reports.values())
    if dropped > FAILURE_FRACTION * (len(pairs) + len(tangents)):
        code = 3
    return code, res, csvs, flags


def _task_localize(D, cfgjson, scfg, seed, threads):
    wcfg = cfgjson.get("window")
    if not wcfg:
        raise ConfigError("localize task needs a window")
    p = np.asarray([complex(re, im) for re, im in wcfg["center"]])
    window = Window(center=p, r_outer=float(wcfg["r_outer"]), r_inner=float(wcfg["r_inner"]))
    setup = bounds.LocalizationSetup(domain=D, boundary_point=p, window=window, cfg=scfg)
    count = int(cfgjson.get("samples", 40))
    dmin = float(cfgjson.get("delta_min", 0.01))
    dmax = float(cfgjson.get("delta_max", 0.12))
    pairs = _window_pairs(D, setup, count, seed, dmin, dmax)
    tcount = int(cfgjson.get("tangent_samples", count // 2))
    tangents = []
    i = 0
    while len(tangents) < tcount and i < 100 * tcount:
        z, _ = sample_pair_near(D, setup.boundary_point, dmin, dmax, seed=_row_seed(seed, 40_000 + i))
        i += 1
        if setup.inner_contains(z):
            rng = np.random.default_rng(_row_seed(seed, 50_000 + i))
            tangents.append(Tangent(z, rng.normal(size=2 * D.dimension).view(np.complex128)))
    reports = bounds.check_localization(setup, pairs, tangents, seed=seed)
    flags = []
    code = _flag_reports(reports, flags)
    res = {k: rep.to_summary() for k, rep in reports.items()}
    csvs = {f"localize_{k}": _report_csv(rep, D.dimension) for k, rep in reports.items()}
    return code, res, csvs, flags


def _task_classical(D, cfgjson, scfg, seed, threads):
    count = int(cfgjson.get("samples", 50))
    dmin = float(cfgjson.get("delta_min", 0.02))
    dmax = float(cfgjson.get("delta_max", 0.5))
    pairs = _sampled_pairs(D, count, seed, dmin, dmax)
    tangents = _sampled_tangents(D, int(cfgjson.get("tangent_samples", count // 2)), seed, dmin, dmax)
    reports = bounds.verify_classical(D, pairs, tangents, scfg, seed=seed)
    flags = []
    code = _flag_reports(reports, flags)
    low = reports.get("log_lower")
    if low is not None and low.extras.get("min_margin", 0.0) < -1e-9:
        flags.append("log lower bound violated")
        code = 2
    res = {k: rep.to_summary() for k, rep in reports.items()}
    csvs = {f"classical_{k}": _report_csv(rep, D.dimension) for k, rep in reports.items()}
    return code, res, csvs, flags


def _task_visibility(D, cfgjson, scfg, seed, threads):
    if "boundary_pairs" in cfgjson:
        bpairs = [
            (np.asarray([complex(re, im) for re, im in p]), np.asarray([complex(re, im) for re, im in q]))
            for p, q in cfgjson["boundary_pairs"]
        ]
    else:
        count = int(cfgjson.get("samples", 10))
        sep_min = float(cfgjson.get("min_separation", 1.0))
        rng = np.random.default_rng(seed)
        bpairs = []
        while len(bpairs) < count:
            p = D.sample_boundary(1, rng)[0]
            q = D.sample_boundary(1, rng)[0]
            # keep pairs well separated so the bounded side is meaningful
            if float(np.linalg.norm(p - q)) >= sep_min:
                bpairs.append((p, q))
    out = geodesics.visibility_classify(
        D, bpairs,
        levels=int(cfgjson.get("levels", 14)),
        delta0=float(cfgjson.get("delta0", 0.1)),
        cfg=scfg,
    )
    rows = []
    for pi, probe in enumerate(out["probes"]):
        for j, (d, v) in enumerate(zip(probe.deltas, probe.values)):
            rows.append(
                _point_vals(probe.p) + _point_vals(probe.q) + [j, d, v, probe.slope, probe.verdict]
            )
    n = D.dimension
    header = _point_cols("p", n) + _point_cols("q", n) + ["j", "delta", "gromov", "slope", "verdict"]
    res = {
        "overall": out["overall"],
        "witnesses": len(out["witnesses"]),
        "probes": len(out["probes"]),
        "max_sup": max(pr.sup for pr in out["probes"]),
    }
    if out["witnesses"]:
        res["witness_p"] = _point_vals(out["witnesses"][0].p)
        res["witness_q"] = _point_vals(out["witnesses"][0].q)
    return 0, res, {"visibility": (header, rows)}, []


def _task_completeness(D, cfgjson, scfg, seed, threads):
    pts = cfgjson.get("boundary_points")
    if pts:
        points = [np.asarray([complex(re, im) for re, im in p]) for p in pts]
    else:
        rng = np.random.default_rng(seed)
        points = list(D.sample_boundary(int(cfgjson.get("samples", 4)), rng))
    pattern = cfgjson.get("pattern", "radial")
    rows = []
    slopes = []
    for p in points:
        probe = geodesics.strong_completeness_probe(
            D, p, pattern=pattern,
            levels=int(cfgjson.get("levels", 20)),
            delta0=float(cfgjson.get("delta0", 0.1)),
            cfg=scfg,
        )
        slopes.append(probe["slope"])
        for j, (d, v) in enumerate(zip(probe["deltas"], probe["values"])):
            rows.append(_point_vals(p) + [j, d, v, probe["slope"], int(probe["divergent"])])
    header = _point_cols("p", D.dimension) + ["j", "delta", "gromov", "slope", "divergent"]
    res = {
        "points": len(points),
        "pattern": pattern,
        "min_slope": min(slopes),
        "max_slope": max(slopes),
        "all_divergent": bool(all(s >= geodesics.COMPLETENESS_SLOPE for s in slopes)),
    }
    return 0, res, {"completeness": (header, rows)}, []


def _task_geodesic(D, cfgjson, scfg, seed, threads):
    count = int(cfgjson.get("samples", 10))
    dmin = float(cfgjson.get("delta_min", 0.05))
    dmax = float(cfgjson.get("delta_max", 0.6))
    pairs = _sampled_pairs(D, count, seed, dmin, dmax)
    rows = []
    rejects = 0
    exported = []
    for i, (z, w) in enumerate(pairs):
        row_cfg = SolverConfig(**{**scfg.__dict__, "seed": _row_seed(seed, i)})
        try:
            rec = geodesics.complex_geodesic(D, z, w, row_cfg)
            rec = geodesics.normalize_star(rec, D)
            ext = geodesics.boundary_extension_check(rec, [])
            rows.append(
                [i] + _point_vals(z) + _point_vals(w)
                + [rec.defect, int(rec.accepted), ext["radial_oscillation"]]
            )
            exported.append(
                {
                    "index": i,
                    "defect": rec.defect,
                    "star_normalized": rec.star_normalized,
                    "disc": rec.disc.to_json(),
                }
            )
        except (geodesics.GeodesicRejection, SolverFailure):
            rejects += 1
    header = ["index"] + _point_cols("z", D.dimension) + _point_cols("w", D.dimension) + [
        "defect", "accepted", "radial_oscillation",
    ]
    res = {"pairs": len(rows), "rejections": rejects, "disc_export": "geodesic_discs.json"}
    code = 3 if rejects > FAILURE_FRACTION * count else 0
    extra = {"geodesic_discs.json": exported}
    return code, res, {"geodesic": (header, rows), "__json__": extra}, []


def _task_mconvex(D, cfgjson, scfg, seed, threads):
    m = float(cfgjson.get("m", 2.0))
    report = m_convexity_probe(
        D, m,
        samples=int(cfgjson.get("samples", 200)),
        seed=seed,
        delta_max=float(cfgjson.get("delta_max", 0.1)),
        delta_min=float(cfgjson.get("delta_min", 1e-5)),
    )
    rows = [[i, mid, sup] for i, (mid, sup) in enumerate(report.bands)]
    header = ["index", "delta_mid", "band_sup_ratio"]
    res = {
        "m": m,
        "max_ratio": report.max_ratio,
        "slope": report.slope,
        "divergent": bool(report.divergent),
    }
    flags = [f"ratio diverges as delta -> 0 (slope {report.slope:.2f})"] if report.divergent else []
    return (2 if report.divergent else 0), res, {"mconvex": (header, rows)}, flags


_TASK_FNS = {
    "metric": _task_metric,
    "sandwich": _task_sandwich,
    "theorem1": _task_theorem1,
    "localize": _task_localize,
    "classical": _task_classical,
    "visibility": _task_visibility,
    "completeness": _task_completeness,
    "geodesic": _task_geodesic,
    "mconvex": _task_mconvex,
}


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------


def run_config(cfgjson: dict, out_dir: Path, quiet: bool = False, threads: int = 1) -> int:
    t0 = time.monotonic()
    task = cfgjson.get("task")
    if task not in _TASK_FNS:
        raise ConfigError(f"unknown or missing task: {task!r}")
    if "seed" not in cfgjson:
        raise ConfigError("seed is mandatory")
    seed = int(cfgjson["seed"])
    if "domain" not in cfgjson:
        raise ConfigError("domain is mandatory")
    D = domain_from_json(cfgjson["domain"])
    scfg = SolverConfig.from_json(cfgjson.get("solver", {}))
    out_dir.mkdir(parents=True, exist_ok=True)
    code, results, csvs, flags = _TASK_FNS[task](D, cfgjson, scfg, seed, threads)
    json_extras = csvs.pop("__json__", {})
    for name, payload in json_extras.items():
        (out_dir / name).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    csv_files = []
    for name, (header, rows) in csvs.items():
        path = out_dir / f"{name}.csv"
        _write_csv(path, header, rows)
        csv_files.append(path.name)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "task": task,
        "seed": seed,
        "domain": cfgjson["domain"],
        "exit_code": code,
        "samples": int(cfgjson.get("samples", 0)),
        "solver": scfg.to_json(),
        "results": results,
        "flags": flags,
        "csv_files": sorted(csv_files),
        "runtime_seconds": time.monotonic() - t0,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if not quiet:
        print(f"task {task}: exit {code}; {len(csv_files)} csv file(s) in {out_dir}")
        for flag in flags:
            print(f"  flag: {flag}")
    return code


def describe_domain(spec: str) -> str:
    if spec.startswith("@"):
        obj = json.loads(Path(spec[1:]).read_text())
    else:
        obj = json.loads(spec)
    D = domain_from_json(obj)
    lines = [D.describe()]
    try:
        verdict = disc_free_certificate(D)
        if verdict.found:
            lines.append(f"boundary contains an affine disc ({verdict.method})")
        else:
            lines.append(f"boundary disc-free ({verdict.method})")
    except InvmetError:
        lines.append("boundary disc structure: not determined for this kind")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="invmet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run an experiment config")
    runp.add_argument("--config", required=True)
    runp.add_argument("--seed", type=int, default=None, help="override the config seed")
    runp.add_argument("--task", default=None, help="override the config task")
    runp.add_argument("--out", default=None, help="output directory")
    runp.add_argument("--quiet", action="store_true")
    runp.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    desp = sub.add_parser("describe", help="summarize a domain JSON (no solves)")
    desp.add_argument("--domain", required=True, help="inline JSON or @path")
    args = parser.parse_args(argv)
    if args.command == "describe":
        try:
            print(describe_domain(args.domain))
            return 0
        except (ValueError, OSError, InvmetError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    try:
        cfgjson = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        cfgjson["seed"] = args.seed
    if args.task is not None:
        cfgjson["task"] = args.task
    out_dir = Path(args.out or cfgjson.get("out", "invmet_out"))
    try:
        return run_config(cfgjson, out_dir, quiet=args.quiet, threads=args.threads)
    except (ConfigError, ValueError, InvmetError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
