"""Batch front door: JSON config in, JSON report + CSV out.

Exit codes: 0 all checks passed, 1 divergence/NaN flags raised, 2 invalid
configuration (with a field-path diagnostic).  Identical config + seed must
produce byte-identical CSV, so every stochastic step draws from an explicit
seed and floats are written with shortest round-trip formatting.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds, capacity, dyadic, oracle, potentials
from .geometry import Ball
from .measures import ConfigError, Measure, measure_from_config, zero_measure
from .quadrature import QuadratureSpec


class RunError(RuntimeError):
    pass


def _require(cfg: dict, key: str, path: str):
    if key not in cfg:
        raise ConfigError(f"{path}.{key}", "required")
    return cfg[key]


def load_quad(cfg: dict, refine: float = 1.0) -> QuadratureSpec:
    q = cfg.get("quad", {})
    spec = QuadratureSpec(
        per_octave=int(q.get("per_octave", 32)),
        r_min_octaves=int(q.get("r_min_octaves", 60)),
        tail_completion=bool(q.get("tail_completion", True)),
    )
    return spec.refined(refine) if refine != 1.0 else spec


def load_domain(cfg: dict, n: int):
    d = cfg.get("domain", {"type": "entire"})
    if d.get("type", "entire") == "entire":
        return bounds.EntireSpace(n)
    if d["type"] == "ball":
        return bounds.BallDomain(tuple(d["center"]), float(d["radius"]))
    raise ConfigError("domain.type", f"unknown domain {d.get('type')!r}")


def load_points(cfg: dict, n: int, seed: int) -> np.ndarray:
    pts = cfg.get("points")
    if isinstance(pts, list):
        arr = np.asarray(pts, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != n:
            raise ConfigError("points", f"expected rows of length {n}")
        return arr
    if isinstance(pts, dict):
        count = int(_require(pts, "count", "points"))
        rng = np.random.default_rng(pts.get("seed", seed))
        ball = _require(pts, "ball", "points")
        center = np.asarray(ball["center"], dtype=float)
        radius = float(ball["radius"])
        raw = rng.normal(size=(count, n))
        raw /= np.linalg.norm(raw, axis=1)[:, None]
        radii = radius * rng.uniform(size=count) ** (1.0 / n)
        avoid = float(pts.get("avoid_origin", 0.0))
        out = center + raw * np.maximum(radii, avoid)[:, None]
        return out
    raise ConfigError("points", "expected a list of points or a sampling spec")


def _measure(cfg: dict, key: str, n_hint: int | None = None) -> Measure:
    if key not in cfg:
        if n_hint is None:
            raise ConfigError(key, "required")
        return zero_measure(n_hint)
    return measure_from_config(cfg[key], key)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            raise RunError("NaN in output row")
        return repr(x)
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def write_csv(path: Path, header: list, rows: list):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _point_cols(n: int) -> list:
    return [f"x{i}" for i in range(n)]


# ---------------------------------------------------------------------------
# Subcommands


def cmd_potential(cfg, out, seed, quad):
    params = cfg.get("params", {})
    n = int(_require(params, "n", "params"))
    p = float(_require(params, "p", "params"))
    sigma = _measure(cfg, "sigma", n)
    pts = load_points(cfg, n, seed)
    rows = []
    flags = []
    r_trunc = float(cfg.get("r_trunc", math.inf))
    for x in pts:
        rz = potentials.riesz_report(sigma, x, p, r_trunc, quad)
        wf = potentials.wolff_report(sigma, x, 1.0, p, r_trunc, quad)
        flags.extend(rz.flags + wf.flags)
        rows.append(list(x) + [rz.value, wf.value, "|".join(rz.flags + wf.flags)])
    write_csv(out / "data.csv", _point_cols(n) + ["riesz", "wolff", "flags"], rows)
    return {"points": len(pts)}, sorted(set(flags))


def cmd_capacity(cfg, out, seed, quad):
    params = cfg.get("params", {})
    n = int(_require(params, "n", "params"))
    p = float(_require(params, "p", "params"))
    sigma = _measure(cfg, "sigma", n)
    samp_cfg = cfg.get("sampling", {})
    sampling = capacity.SamplingSpec(
        r_min=float(samp_cfg.get("r_min", 1e-3)),
        r_max=float(samp_cfg.get("r_max", 8.0)),
        per_octave=int(samp_cfg.get("per_octave", 8)),
    )
    report = {}
    flags = []
    ball_rep = capacity.ball_condition_constant(sigma, p, sampling,
                                                cfg.get("threshold"))
    report["ball_condition"] = ball_rep.to_dict()
    if ball_rep.divergent:
        flags.append("ball-condition-divergent")
    tents = [capacity.RadialTent(tuple(t["center"]), t["inner"], t["outer"])
             for t in cfg.get("tents", [])]
    if not tents and ball_rep.witness is not None:
        c0, r0 = ball_rep.witness
        tents = [capacity.RadialTent(c0, r0, 2.0 * r0)]
    if tents:
        mrep = capacity.multiplier_check(sigma, p, tents)
        report["multiplier"] = {"max_ratio": mrep.max_ratio, "ratios": mrep.ratios}
    if "weak_ainf" in cfg:
        wa = cfg["weak_ainf"]
        omega = _measure(cfg, "omega", n)
        rep = capacity.weak_ainf_check(
            omega,
            capacity.WeakAinfParams(float(wa["c_w"]), float(wa["theta"])),
            int(wa.get("trials", 100)),
            Ball(tuple(wa["domain_center"]), float(wa["domain_radius"])),
            seed,
        )
        report["weak_ainf"] = {"max_ratio": rep.max_ratio, "pass": rep.passed,
                               "trials": rep.trials}
        if not rep.passed:
            flags.append("weak-ainf-failed")
    if "morrey" in cfg:
        omega = _measure(cfg, "omega", n)
        mr = bounds.morrey_constant(omega, float(cfg["morrey"]["eps"]), p, sampling)
        report["morrey"] = mr.to_dict()
        if mr.divergent:
            flags.append("morrey-divergent")
    rows = [[k, v.get("constant", v.get("max_ratio")), v.get("pass")]
            for k, v in report.items() if isinstance(v, dict)]
    write_csv(out / "data.csv", ["check", "constant", "pass"], rows)
    return report, flags


def cmd_carleson(cfg, out, seed, quad):
    params = cfg.get("params", {})
    n = int(_require(params, "n", "params"))
    p = float(_require(params, "p", "params"))
    sigma = _measure(cfg, "sigma", n)
    lat = cfg.get("lattice", {})
    max_level = int(lat.get("max_level", 0))
    depth = int(lat.get("depth", 4))
    flags = []
    rep = dyadic.carleson_condition_constant(sigma, p, max_level, depth)
    rep_next = dyadic.carleson_condition_constant(sigma, p, max_level, depth + 1)
    growth = rep_next.constant / rep.constant if rep.constant > 0 else math.inf
    divergent = sigma.has_atoms() or growth > 2.0 ** ((n - p) / (p - 1.0)) * 0.99
    if divergent:
        flags.append("carleson-condition-divergent")
    s = float(cfg.get("embedding_s", 2.0))
    emb = dyadic.carleson_embedding_check(sigma, lambda z: 1.0, s, rep_next.constant,
                                          p, max_level, depth)
    report = {
        "condition_constant": rep.constant,
        "condition_constant_next_depth": rep_next.constant,
        "depth_growth": growth,
        "embedding": {"lhs": emb.lhs, "rhs": emb.rhs, "pass": emb.passed},
    }
    if not emb.passed:
        flags.append("embedding-violated")
    rows = [["condition", rep.constant, None],
            ["condition_next", rep_next.constant, None],
            ["embedding_lhs", emb.lhs, emb.passed],
            ["embedding_rhs", emb.rhs, emb.passed]]
    write_csv(out / "data.csv", ["quantity", "value", "pass"], rows)
    return report, flags


def cmd_supersolution(cfg, out, seed, quad):
    params = cfg.get("params", {})
    n = int(_require(params, "n", "params"))
    p = float(_require(params, "p", "params"))
    beta = float(cfg.get("constants", {}).get("beta", 0.1))
    sigma = _measure(cfg, "sigma", n)
    omega = _measure(cfg, "omega", n)
    pts = load_points(cfg, n, seed)
    rep = bounds.obstacle_check(sigma, omega, beta, p, pts, quad)
    tail = bounds.tail_finiteness(sigma, omega, np.zeros(n),
                                  float(cfg.get("tail_radius", 1.0)), beta, p, quad)
    flags = list(rep.flags)
    if not rep.obstacle_ok:
        flags.append("obstacle-violated")
    if not tail.finite:
        flags.append("tail-divergent")
    rows = [list(x) + [v, w, t, r, ""] for (x, v, w, t, r) in rep.rows]
    write_csv(out / "data.csv",
              _point_cols(n) + ["v", "wolff_omega", "T_v", "ratio", "flags"], rows)
    return {"constant": rep.constant, "obstacle_ok": rep.obstacle_ok,
            "tail_finite": tail.finite, "tail_value": tail.value}, flags


def cmd_lowerbound(cfg, out, seed, quad):
    params = cfg.get("params", {})
    n = int(_require(params, "n", "params"))
    p = float(_require(params, "p", "params"))
    c = float(cfg.get("constants", {}).get("c", 0.5))
    sigma = _measure(cfg, "sigma", n)
    omega = _measure(cfg, "omega", n)
    x0 = np.asarray(cfg.get("localize_center", [0.0] * n), dtype=float)
    big_r = float(cfg.get("localize_radius", 2.0))
    sig_loc, om_loc = bounds.localize(sigma, omega, x0, big_r)
    pts = load_points(cfg, n, seed)
    j_max = int(cfg.get("j_max", 12))
    series_c = float(cfg.get("series_constant", 1.0))
    q = float(cfg.get("series_q", 2.0))
    rows = []
    for x in pts:
        series = bounds.neumann_series_lower(sig_loc, om_loc, x, p, j_max, series_c, q, quad)
        closed = bounds.closed_form_lower(sigma, omega, x, c, p,
                                          load_domain(cfg, n), quad)
        rows.append(list(x) + [series.value, closed.value, "|".join(closed.flags)])
    write_csv(out / "data.csv",
              _point_cols(n) + ["neumann_partial", "closed_form", "flags"], rows)
    return {"points": len(rows)}, []


def cmd_bilateral(cfg, out, seed, quad):
    params = cfg.get("params", {})
    n = int(_require(params, "n", "params"))
    p = float(_require(params, "p", "params"))
    consts = cfg.get("constants", {})
    c_lo = float(consts.get("c_lower", consts.get("c", 0.5)))
    c_hi = float(consts.get("c_upper", consts.get("c", 0.5)))
    beta = float(consts.get("beta", min(c_lo, c_hi)))
    sigma = _measure(cfg, "sigma", n)
    omega = _measure(cfg, "omega", n)
    domain = load_domain(cfg, n)
    pts = load_points(cfg, n, seed)
    want_oracle = bool(cfg.get("oracle", False))
    sol = None
    if want_oracle:
        prob = oracle.RadialProblem(p, n, sigma, kind="natural_growth", omega=omega)
        sol = oracle.natural_growth_solve(prob)
    rows = []
    flags = []
    for x in pts:
        lo = bounds.closed_form_lower(sigma, omega, x, c_lo, p, domain, quad)
        hi = bounds.upper_bound_eval(sigma, omega, x, c_hi, p, domain, quad)
        v = bounds.supersolution(sigma, omega, x, beta, p, quad)
        orc = sol.interp(float(np.linalg.norm(x))) if sol is not None else ""
        row_flags = sorted(set(lo.flags + hi.flags + v.flags))
        flags.extend(row_flags)
        rows.append(list(x) + [lo.value, hi.value, v.value, orc, "|".join(row_flags)])
    write_csv(out / "data.csv",
              _point_cols(n) + ["lower", "upper", "v", "oracle", "flags"], rows)
    return {"points": len(rows)}, sorted(set(flags))


def cmd_gauge(cfg, out, seed, quad):
    params = cfg.get("params", {})
    n = int(_require(params, "n", "params"))
    p = float(_require(params, "p", "params"))
    c = float(cfg.get("constants", {}).get("c", 1.0))
    sigma = _measure(cfg, "sigma", n)
    grid_cfg = cfg.get("grid", {})
    grid = oracle.RadialGrid(float(grid_cfg.get("r_min", 1e-3)),
                             float(grid_cfg.get("r_max", 2.0**10)),
                             int(grid_cfg.get("points", 1200)))
    prob = oracle.RadialProblem(p, n, sigma, kind="gauge", grid=grid)
    sol = oracle.gauge_solve(prob)
    res = oracle.riccati_residual(sol, sigma, p, n)
    domain = load_domain(cfg, n)
    rows = []
    stride = max(1, len(sol.r) // int(cfg.get("csv_points", 200)))
    for i in range(0, len(sol.r), stride):
        x = np.zeros(n)
        x[0] = sol.r[i]
        lo, hi = bounds.gauge_bounds(sigma, x, c, p, domain, quad)
        rows.append([sol.r[i], sol.u[i], sol.du[i], lo, hi])
    write_csv(out / "data.csv", ["r", "u", "du", "gauge_lower", "gauge_upper"], rows)
    report = {"iterations": sol.iterations, "riccati_residual": res.max_relative}
    flags = [] if res.max_relative < float(cfg.get("residual_tol", 1e-3)) else ["riccati-residual-large"]
    return report, flags


def cmd_hessian(cfg, out, seed, quad):
    params = cfg.get("params", {})
    n = int(_require(params, "n", "params"))
    k = int(_require(params, "k", "params"))
    c = float(cfg.get("constants", {}).get("c", 0.5))
    sigma = _measure(cfg, "sigma", n)
    omega = _measure(cfg, "omega", n)
    pts = load_points(cfg, n, seed)
    variant = cfg.get("outer_exponent", "match")
    rows = []
    for x in pts:
        lo = bounds.hessian_bound(sigma, omega, x, c, k, n, "lower", variant, quad)
        hi = bounds.hessian_bound(sigma, omega, x, c, k, n, "upper", variant, quad)
        rows.append(list(x) + [lo.value, hi.value, "|".join(sorted(set(lo.flags + hi.flags)))])
    write_csv(out / "data.csv", _point_cols(n) + ["lower", "upper", "flags"], rows)
    par = bounds.hessian_params(k, n)
    return {"alpha": par.alpha, "beta": par.beta, "s": par.s}, []


COMMANDS = {
    "potential": cmd_potential,
    "capacity": cmd_capacity,
    "carleson": cmd_carleson,
    "supersolution": cmd_supersolution,
    "lowerbound": cmd_lowerbound,
    "bilateral": cmd_bilateral,
    "gauge": cmd_gauge,
    "hessian": cmd_hessian,
}

REPORT_SCHEMA_VERSION = 1


def compare_with_baseline(report: dict, baseline_path: Path, rtol: float) -> list:
    with open(baseline_path) as fh:
        base = json.load(fh)

    problems = []

    def walk(a, b, path):
        if isinstance(a, dict) and isinstance(b, dict):
            for key in a:
                if key in b:
                    walk(a[key], b[key], f"{path}.{key}")
            return
        if isinstance(a, (int, float)) and isinstance(b, (int, float)):
            scale = max(abs(a), abs(b), 1e-300)
            if abs(a - b) / scale > rtol:
                problems.append(f"{path}: {a} vs baseline {b}")

    walk(report.get("result", {}), base.get("result", {}), "result")
    return problems


def run(config: dict, out_dir: Path, seed: int | None = None,
        refine: float = 1.0, baseline: Path | None = None) -> int:
    command = config.get("command")
    if command not in COMMANDS:
        raise ConfigError("command", f"unknown or missing command {command!r}")
    eff_seed = int(config.get("seed", 0)) if seed is None else seed
    quad = load_quad(config, refine)
    out_dir.mkdir(parents=True, exist_ok=True)
    result, flags = COMMANDS[command](config, out_dir, eff_seed, quad)
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": command,
        "seed": eff_seed,
        "result": result,
        "flags": flags,
    }
    status = 0 if not flags else 1
    if baseline is not None:
        mismatches = compare_with_baseline(report, baseline,
                                           float(config.get("baseline_rtol", 0.05)))
        report["baseline_mismatches"] = mismatches
        if mismatches:
            status = max(status, 1)
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return status


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="wolffpot",
                                 description="nonlinear potential estimates at desk scale")
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--refine", type=float, default=1.0,
                    help="multiply quadrature resolution")
    ap.add_argument("--baseline", default=None, help="report.json to regress against")
    args = ap.parse_args(argv)
    try:
        with open(args.config) as fh:
            config = json.load(fh)
    except FileNotFoundError:
        print(f"config: file not found: {args.config}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"config: invalid JSON: {exc}", file=sys.stderr)
        return 2
    try:
        return run(config, Path(args.out), args.seed, args.refine,
                   Path(args.baseline) if args.baseline else None)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (RunError, ValueError, RuntimeError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
