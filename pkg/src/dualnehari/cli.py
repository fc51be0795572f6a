"""Command-line entry point.

    python3 -m dualnehari {check,solve,subharmonic,sweep,verify} --config run.cfg --out out/

Exit codes: 0 success, 1 configuration error, 2 hypothesis failure
(regularity of g or the Landesman-Lazer condition), 3 solver error or a
failed verification row.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import (assemble, exhaustion_sweep, minimal_period_certificate, necessity_check,
                       solve_subharmonic)
from .config import ConfigError, RunConfig, apply_overrides, load_config, parse_config
from .errors import DualNehariError
from .functional import GridFunction, nodes_for
from .io import stamp, write_json
from .oracle import brute_force_partition, fd_phi_derivative, shoot_bvp, shooting_gap
from .partition import maximality_probe, maximize_partition
from .problem import (check_periodic, constant_forcing, decompose_periodic, estimate_average,
                      landesman_lazer_margin, validate_h1, zero_reaction)
from .signed import (certify_spacing_floor, minimize_signed, nondegeneracy_eigenvalue, phi_derivatives,
                     uniqueness_probe)

EXIT_OK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_SOLVER = 0, 1, 2, 3


class HypothesisFailure(Exception):
    def __init__(self, reasons):
        super().__init__("; ".join(reasons))
        self.reasons = reasons


def _problem(cfg: RunConfig):
    try:
        return cfg.problem.reaction(), cfg.problem.forcing()
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _say(msg: str = "") -> None:
    print(msg, flush=True)


# ---------------------------------------------------------------------------
# check


def run_check(cfg: RunConfig) -> dict:
    g, p = _problem(cfg)
    reasons = []
    report = validate_h1(g)
    for c in report.clauses:
        if not c.passed:
            reasons.append(f"h1: {c.name} fails near s = {c.worst_point:.6g}")
    m = landesman_lazer_margin(g, p)
    if m.upper_margin <= 0:
        reasons.append("landesman_lazer: upper margin ≤ 0")
    if m.lower_margin <= 0:
        reasons.append("landesman_lazer: lower margin ≤ 0")
    T = 100.0 * (p.period or 2 * math.pi)
    a_hat, dev = estimate_average(p, T, [0.0, 0.37 * T, 1.9 * T])
    avg_tol = p.average_error(T) + 1e-6
    if abs(a_hat - p.average) > avg_tol:
        reasons.append(f"average: window mean {a_hat:.6g} differs from declared {p.average:.6g}")
    out = {"h1": {c.name: c.passed for c in report.clauses},
           "margins": {"lower": m.lower_margin, "upper": m.upper_margin, "ok": m.ok},
           "g_minus": g.g_minus, "g_plus": g.g_plus, "average": p.average,
           "average_estimate": {"window": T, "value": a_hat, "probe_spread": dev, "tolerance": avg_tol}}
    if p.period is not None:
        out["periodicity_defect"] = check_periodic(p)
        dec = decompose_periodic(p)
        out["decomposition"] = {"p2_sup": dec.p2_sup, "M_eps": dec.M_eps}
    out["passed"] = not reasons
    out["reasons"] = reasons
    return out


def cmd_check(cfg: RunConfig) -> int:
    rep = run_check(cfg)
    out = Path(cfg.out)
    write_json(out / "check.json", stamp(rep, cfg, __version__))
    mg = rep["margins"]
    _say(f"margins: lower {mg['lower']:.6f}  upper {mg['upper']:.6f}")
    for r in rep["reasons"]:
        _say(f"FAIL {r}")
    _say("check: " + ("ok" if rep["passed"] else "hypothesis failure"))
    return EXIT_OK if rep["passed"] else EXIT_HYPOTHESIS


def _require_hypotheses(cfg: RunConfig) -> None:
    rep = run_check(cfg)
    if not rep["passed"]:
        raise HypothesisFailure(rep["reasons"])


def _floor(cfg: RunConfig, g, p):
    if cfg.solver.min_length is not None:
        return cfg.solver.min_length, None
    br = certify_spacing_floor(g, p, cfg.bracket_eps, opts=cfg.solver)
    _say(f"bracket eps = {br.epsilon:.4g}  ({br.ordering})")
    _say("  length   phi+/len^3    phi-/len^3   ok")
    for row in br.diagnostics:
        _say(f"  {row['length']:6g}  {row.get('ratio+', float('nan')):11.6f}  "
             f"{row.get('ratio-', float('nan')):11.6f}   {row['ok']}")
    _say(f"certified spacing floor L = {br.L:g}")
    return br.L, br


def _bracket_summary(br):
    if br is None:
        return None
    return {"epsilon": br.epsilon, "L": br.L, "alpha": [br.alpha_lower, br.alpha_upper],
            "beta": [br.beta_lower, br.beta_upper], "ordering": br.ordering,
            "rel_alpha_beta": br.rel_alpha_beta, "rows": br.diagnostics}


def _minimizer_rows(mins, br):
    rows = []
    for m in mins:
        ratio = m.phi / m.length ** 3
        row = {"a": m.a, "b": m.b, "sign": m.sign, "phi": m.phi, "ratio": ratio, "slope_a": m.slope_a,
               "slope_b": m.slope_b, "kkt": m.kkt_residual, "lambda_min": m.lambda_min,
               "active_set": m.active_set_size}
        if br is not None:
            lo, hi = br.bounds(m.sign)
            row["in_bracket"] = lo <= ratio <= hi
        rows.append(row)
    return rows


def _solution_summary(sol):
    return {"zeros": sol.zeros, "edges": sol.edges, "signs": sol.signs, "sup_norm": sol.sup_norm,
            "slope_sup_norm": sol.slope_sup_norm, "ode_residual_sup": sol.ode_residual_sup,
            "corner_mismatch_max": sol.corner_mismatch_max, "corner_slope_jumps": sol.corner_slope_jumps,
            "min_zero_speed": sol.min_zero_speed, "bounds": sol.bounds}


def _windows(span):
    return [w for w in (10.0, 20.0, 40.0) if w < span] + [span]


# ---------------------------------------------------------------------------
# solve


def cmd_solve(cfg: RunConfig) -> int:
    _require_hypotheses(cfg)
    g, p = _problem(cfg)
    sp = cfg.solve
    clock = time.perf_counter()
    L, br = _floor(cfg, g, p)
    res = maximize_partition(sp.A, sp.B, sp.k, sp.start_sign, g, p, cfg.solver, L=L)
    sol = assemble(res, g, p)
    nec = necessity_check(sol, g, p, _windows(sp.B - sp.A))
    all_lower, best_probe, _ = maximality_probe(res, g, p, dataclasses.replace(cfg.solver, min_length=L),
                                                n_probes=20, seed=cfg.seed)
    elapsed = time.perf_counter() - clock
    scale = 1 + res.slope_scale ** 2
    checks = {
        "grad_norm": res.grad_norm <= cfg.solver.outer_tol * (1 + abs(res.psi)),
        "corner_mismatch": res.max_corner_mismatch <= cfg.solver.mismatch_tol * scale,
        "sandwich_upper": bool(sol.bounds["upper_ok"]),
        "sandwich_lower": bool(sol.bounds["lower_printed_ok"]),
        "necessity": bool(nec["passed"]),
        "nondegenerate": all(m.lambda_min > 0 for m in res.minimizers),
        "maximality_probe": all_lower,
        "sign_changes": sol.sign_changes() == sp.k,
    }
    summary = {"command": "solve", "A": sp.A, "B": sp.B, "k": sp.k, "start_sign": sp.start_sign,
               "partition": res.partition.points, "lengths": res.partition.lengths, "psi": res.psi,
               "grad_norm": res.grad_norm, "iterations": res.iterations, "corner_mismatches":
               res.corner_mismatches, "ratio_stats": res.ratio_stats._asdict(), "bracket": _bracket_summary(br),
               "spacing_floor": L, "minimizers": _minimizer_rows(res.minimizers, br),
               "solution": _solution_summary(sol), "necessity": nec, "maximality_best_probe": best_probe,
               "checks": checks}
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    sol.to_csv(out / "solution.csv")
    res.write_trace(out / "trace.csv")
    write_json(out / "summary.json", stamp(summary, cfg, __version__))
    write_json(out / "timing.json", {"seconds": elapsed})
    _say(f"partition: {np.round(res.partition.points, 6).tolist()}  psi = {res.psi:.10g}")
    _say("corner residuals: " + ", ".join(f"{x:.2e}" for x in res.corner_mismatches))
    for name, ok in checks.items():
        _say(f"  {'PASS' if ok else 'FAIL'} {name}")
    return EXIT_OK if all(checks.values()) else EXIT_SOLVER


# ---------------------------------------------------------------------------
# subharmonic


def cmd_subharmonic(cfg: RunConfig) -> int:
    g, p = _problem(cfg)
    if p.period is None:
        raise ConfigError("[forcing] period is required for subharmonics")
    _require_hypotheses(cfg)
    sh = cfg.subharmonic
    clock = time.perf_counter()
    L, br = _floor(cfg, g, p)
    sol = solve_subharmonic(p.period, sh.n, sh.k, g, p, cfg.solver, L=L)
    cert = minimal_period_certificate(sol)
    elapsed = time.perf_counter() - clock
    value_gap, slope_gap = sol.closure_residuals
    checks = {"closure": max(value_gap, slope_gap) <= 1e-4, "zero_count": sol.zero_count() == sh.k,
              "grad_norm": sol.partition.grad_norm <= cfg.solver.outer_tol * (1 + abs(sol.partition.psi))}
    if cert["coprime"]:
        checks["minimal_period"] = bool(cert["passed"])
    summary = {"command": "subharmonic", "T": p.period, "n": sh.n, "k": sh.k, "t0": sol.t0,
               "t0_flat": sol.t0_flat, "t0_flat_gradient": sol.t0_flat_gradient,
               "closure": {"value_gap": value_gap, "slope_gap": slope_gap}, "zero_count": sol.zero_count(),
               "partition": sol.partition.partition.points, "psi": sol.partition.psi,
               "grad_norm": sol.partition.grad_norm, "bracket": _bracket_summary(br), "spacing_floor": L,
               "solution": _solution_summary(sol.glued), "minimal_period": cert, "checks": checks}
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    sol.to_csv(out / "subharmonic.csv")
    write_json(out / "summary.json", stamp(summary, cfg, __version__))
    write_json(out / "timing.json", {"seconds": elapsed})
    _say(f"t0 = {sol.t0:.6f}  closure gaps {value_gap:.2e} / {slope_gap:.2e}  zeros per period {sol.zero_count()}")
    for name, ok in checks.items():
        _say(f"  {'PASS' if ok else 'FAIL'} {name}")
    return EXIT_OK if all(checks.values()) else EXIT_SOLVER


# ---------------------------------------------------------------------------
# sweep


def cmd_sweep(cfg: RunConfig) -> int:
    _require_hypotheses(cfg)
    g, p = _problem(cfg)
    sw = cfg.sweep
    clock = time.perf_counter()
    L, br = _floor(cfg, g, p)
    sols, report = exhaustion_sweep(sw.mu, sw.n_values, g, p, cfg.solver, L=L, window=sw.window)
    elapsed = time.perf_counter() - clock
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for s in sols:
        n = int(round((s.B - s.A) / (2 * sw.mu)))
        s.to_csv(out / f"sweep_n{n}.csv")
    summary = {"command": "sweep", "bracket": _bracket_summary(br), "spacing_floor": L, **report,
               "solutions": [_solution_summary(s) for s in sols]}
    write_json(out / "summary.json", stamp(summary, cfg, __version__))
    write_json(out / "timing.json", {"seconds": elapsed})
    for d in report["differences"]:
        _say(f"n = {d['n']} -> {d['n_next']}: central C1 difference {d['c1']:.6g}")
    for e in report["errors"]:
        _say(f"n = {e['n']}: {e['error']}")
    return EXIT_SOLVER if report["errors"] else EXIT_OK


# ---------------------------------------------------------------------------
# verify


def run_verify(cfg: RunConfig) -> list[dict]:
    """Oracle battery; each row is {name, passed, value, tolerance}."""
    g, p = _problem(cfg)
    opts = cfg.solver
    v = cfg.verify
    rows = []

    def row(name, passed, value, tolerance):
        rows.append({"name": name, "passed": bool(passed), "value": value, "tolerance": tolerance})

    # limit problem on (0, 1)
    r = minimize_signed(0.0, 1.0, 1, zero_reaction(), constant_forcing(-1.0), opts, n=999,
                        compute_eigenvalue=False)
    t = r.u.nodes
    row("limit_profile", np.max(np.abs(r.u.values - 0.5 * t * (1 - t))) <= 1e-6,
        float(np.max(np.abs(r.u.values - 0.5 * t * (1 - t)))), 1e-6)
    # linear elements miss the parabola's energy by exactly h^2/24 (k = 1)
    predicted = -1 / 24 + r.u.h ** 2 / 24
    row("limit_value", abs(r.phi - predicted) <= 1e-12, abs(r.phi - predicted), 1e-12)

    for s in (1, -1):
        tag = "+" if s > 0 else "-"
        shot = shoot_bvp(v.a, v.b, s, g, p)
        coarse = shooting_gap(v.a, v.b, s, g, p, opts.h_target, opts, shot)
        fine = shooting_gap(v.a, v.b, s, g, p, opts.h_target / 4, opts, shot)
        row(f"shooting_gap{tag}", coarse <= 1e-3, coarse, 1e-3)
        row(f"shooting_refinement{tag}", coarse >= 3 * fine, coarse / fine if fine > 0 else math.inf, 3.0)

        m = minimize_signed(v.a, v.b, s, g, p, opts)
        exact = np.array(phi_derivatives(m))
        fd = np.array(fd_phi_derivative(v.a, v.b, s, g, p, v.delta, opts))
        rel = float(np.max(np.abs(exact - fd) / np.abs(fd)))
        row(f"phi_derivative{tag}", rel <= 1e-3, rel, 1e-3)

        dist, results = uniqueness_probe(v.a, v.b, s, g, p, n_starts=opts.n_starts, seed=cfg.seed, opts=opts)
        row(f"uniqueness{tag}", dist <= 1e-6, dist, 1e-6)
        lam = min(x.lambda_min for x in results)
        row(f"nondegeneracy{tag}", lam > 0, lam, 0.0)

    zero = GridFunction(0.0, 10.0, np.zeros(nodes_for(0.0, 10.0, opts.h_target)))
    lam0 = nondegeneracy_eigenvalue(zero, g)
    row("degenerate_control", lam0 < 0, lam0, 0.0)

    L = opts.min_length if opts.min_length is not None else certify_spacing_floor(g, p, cfg.bracket_eps,
                                                                                 opts=opts).L
    if v.brute_B - 2 * L >= 0:
        bf = brute_force_partition(0.0, v.brute_B, 1, v.brute_step, g, p, opts, L=L)
        mp = maximize_partition(0.0, v.brute_B, 1, 1, g, p, opts, L=L)
        d = abs(bf.partition.points[0] - mp.partition.points[0])
        row("brute_force_k1", d <= v.brute_step * (1 + 1e-9), d, v.brute_step)
    return rows


def cmd_verify(cfg: RunConfig) -> int:
    _require_hypotheses(cfg)
    clock = time.perf_counter()
    rows = run_verify(cfg)
    elapsed = time.perf_counter() - clock
    out = Path(cfg.out)
    write_json(out / "verify.json", stamp({"command": "verify", "rows": rows}, cfg, __version__))
    write_json(out / "timing.json", {"seconds": elapsed})
    width = max(len(r["name"]) for r in rows)
    for r in rows:
        _say(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']:<{width}}  {r['value']:.3e}  (tol {r['tolerance']:g})")
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_SOLVER


# ---------------------------------------------------------------------------


COMMANDS = {"check": cmd_check, "solve": cmd_solve, "subharmonic": cmd_subharmonic, "sweep": cmd_sweep,
            "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dualnehari", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="sectioned key = value file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int, help="threads for per-piece solves (default: all cores)")
    common.add_argument("--h", type=float, help="target grid spacing")
    common.add_argument("--tol", type=float, help="KKT tolerance of the signed minimizer")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = load_config(args.config) if args.config else parse_config("")
        cfg = apply_overrides(cfg, out=args.out, seed=args.seed, workers=args.workers, h=args.h, tol=args.tol)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisFailure as exc:
        for r in exc.reasons:
            print(f"hypothesis: {r}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except DualNehariError as exc:
        print(f"solver error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
