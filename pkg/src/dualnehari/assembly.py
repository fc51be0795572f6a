"""Gluing alternating minimizers into solutions, subharmonics and exhaustion.

A stationary partition has matching corner speeds, so the concatenation of
the one-signed minimizers is C^1 and solves the equation on the whole span.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import BoundaryStuck, NonConvergence, NotPeriodic
from .functional import nodes_for
from .partition import (Partition, PartitionResult, _solve_pieces, _with_floor, corner_gradient,
                        initial_lengths, maximize_partition, project_spacing, projected_ascent,
                        ratio_diagnostics, ratio_stats)
from .problem import ForcingTerm, ReactionTerm, landesman_lazer_margin
from .signed import SolverOptions, _dp, certify_spacing_floor, make_bracket


@dataclass
class GluedSolution:
    t_samples: np.ndarray
    u_samples: np.ndarray
    du_samples: np.ndarray
    zeros: np.ndarray
    corner_mismatch_max: float
    ode_residual_sup: float
    sup_norm: float
    slope_sup_norm: float
    edges: np.ndarray
    signs: list
    corner_slope_jumps: np.ndarray
    min_zero_speed: float
    lambda_lower: float
    lambda_upper: float
    bounds: dict = field(default_factory=dict)
    int_f: Optional[np.ndarray] = None     # running integral of p - g(u), consistent with du

    @property
    def A(self) -> float:
        return float(self.t_samples[0])

    @property
    def B(self) -> float:
        return float(self.t_samples[-1])

    def sign_changes(self, lo: Optional[float] = None, hi: Optional[float] = None) -> int:
        t, u = self.t_samples, self.u_samples
        mask = np.ones(t.size, bool)
        if lo is not None:
            mask &= t > lo
        if hi is not None:
            mask &= t < hi
        s = np.sign(u[mask])
        s = s[s != 0]
        return int(np.count_nonzero(s[1:] != s[:-1]))

    def to_csv(self, path) -> None:
        write_curve_csv(path, self.t_samples, self.u_samples, self.du_samples)


def write_curve_csv(path, t, u, du) -> None:
    with open(path, "w") as fh:
        fh.write("t,u,du\n")
        for row in zip(t, u, du):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def _piece_samples(m, g, p):
    """Full-node samples of one minimizer: values, derivatives and the running
    integral of f = p - g(u) from the left end.

    Interior derivatives are centered differences; the end slopes are the
    minimizer's fourth-order ones.  The integral is the trapezoid rule plus
    Euler-Maclaurin end corrections h^2/12 f' (f' = p' - g'(0) u' where u
    vanishes), which is exactly what the end-slope formula implies, so
    du(t_j) - du(t_i) equals the integral between any two samples.
    """
    t = m.u.full_nodes()
    u = m.u.full_values()
    h = m.u.h
    du = np.empty_like(u)
    du[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    du[0], du[-1] = m.slope_a, m.slope_b
    f = p.p(t) - g.g(u)
    F = np.concatenate(([0.0], np.cumsum(0.5 * h * (f[1:] + f[:-1]))))
    dg0 = float(g.dg(np.array([0.0]))[0])
    fa = _dp(p, m.a) - dg0 * m.slope_a
    fb = _dp(p, m.b) - dg0 * m.slope_b
    F[1:] += h * h / 12.0 * fa
    F[-1] -= h * h / 12.0 * fb
    return t, u, du, h, F


def _fourth_order_residual(t, u, h, g, p, window=None):
    """u'' (five-point, fourth order) + g(u) - p at nodes whose distance to both
    piece ends is at least ``window`` (default 2h, the stencil half-width)."""
    if u.size < 5:
        return np.zeros(0)
    d2 = (-u[:-4] + 16 * u[1:-3] - 30 * u[2:-2] + 16 * u[3:-1] - u[4:]) / (12 * h * h)
    res = d2 + g.g(u[2:-2]) - p.p(t[2:-2])
    if window is not None:
        tc = t[2:-2]
        keep = (tc - t[0] >= window - 1e-12) & (t[-1] - tc >= window - 1e-12)
        res = res[keep]
    return res


def glue(minimizers, g: ReactionTerm, p: ForcingTerm, corner_mismatch_max: float,
         corner_window: Optional[float] = None) -> GluedSolution:
    ts, us, dus, Fs, res = [], [], [], [], []
    offset = 0.0
    for i, m in enumerate(minimizers):
        t, u, du, h, F = _piece_samples(m, g, p)
        res.append(_fourth_order_residual(t, u, h, g, p, corner_window))
        F = F + offset
        offset = F[-1]
        if i > 0:
            dus[-1][-1] = 0.5 * (dus[-1][-1] + du[0])
            t, u, du, F = t[1:], u[1:], du[1:], F[1:]
        ts.append(t)
        us.append(u)
        dus.append(du.copy())
        Fs.append(F)
    t = np.concatenate(ts)
    u = np.concatenate(us)
    du = np.concatenate(dus)
    edges = np.array([minimizers[0].a] + [m.b for m in minimizers])
    jumps = np.array([minimizers[i].slope_a - minimizers[i - 1].slope_b for i in range(1, len(minimizers))])
    speeds = [abs(minimizers[0].slope_a)] + [min(abs(minimizers[i - 1].slope_b), abs(minimizers[i].slope_a))
                                             for i in range(1, len(minimizers))] + [abs(minimizers[-1].slope_b)]
    lengths = np.diff(edges)
    sol = GluedSolution(
        t_samples=t, u_samples=u, du_samples=du, zeros=edges[1:-1].copy(),
        corner_mismatch_max=float(corner_mismatch_max),
        ode_residual_sup=float(max((np.max(np.abs(r)) for r in res if r.size), default=0.0)),
        sup_norm=float(np.max(np.abs(u))), slope_sup_norm=float(np.max(np.abs(du))),
        edges=edges, signs=[m.sign for m in minimizers], corner_slope_jumps=jumps,
        min_zero_speed=float(min(speeds)), lambda_lower=float(lengths.min()), lambda_upper=float(lengths.max()),
        int_f=np.concatenate(Fs))
    sol.bounds = sandwich_bounds(sol, g, p)
    return sol


def assemble(P: PartitionResult, g: ReactionTerm, p: ForcingTerm,
             corner_window: Optional[float] = None) -> GluedSolution:
    """Concatenate the minimizers of a converged partition.

    ``ode_residual_sup`` uses a fourth-order stencil, so it measures the
    truncation error of the three-point scheme; ``corner_window`` widens the
    excluded neighbourhood of each gluing point (default: 2h).
    """
    if P.partition.k and not P.interior:
        raise BoundaryStuck("cannot glue a partition that sits on the spacing floor")
    return glue(P.minimizers, g, p, P.max_corner_mismatch, corner_window)


def sandwich_bounds(sol: GluedSolution, g: ReactionTerm, p: ForcingTerm) -> dict:
    """Norm bounds from the per-piece estimates: upper C lam_max^2 / C lam_max,
    lower C1 lam_min (as printed) and C1 lam_min^2 (per-piece form)."""
    C = g.sup_norm + p.sup_norm
    br = make_bracket(g, p, 0.0)
    C1 = br.C1_min
    lo, hi = sol.lambda_lower, sol.lambda_upper
    return {
        "C": C, "C1": C1,
        "sup_upper": C * hi * hi, "slope_upper": C * hi,
        "sup_lower_printed": C1 * lo, "sup_lower_squared": C1 * lo * lo,
        "upper_ok": sol.sup_norm <= C * hi * hi and sol.slope_sup_norm <= C * hi,
        "lower_printed_ok": sol.sup_norm >= C1 * lo,
        "lower_squared_ok": sol.sup_norm >= C1 * lo * lo,
    }


# ---------------------------------------------------------------------------
# necessity


def necessity_check(sol: GluedSolution, g: ReactionTerm, p: ForcingTerm, windows: Sequence[float],
                    n_positions: int = 25, identity_tol: float = 1e-6) -> dict:
    """Integrated equation  (u'(t+T) - u'(t))/T = mean of p - g(u)  on sliding windows,
    and window means of g(u) strictly inside (g_-, g_+)."""
    t, u, du = sol.t_samples, sol.u_samples, sol.du_samples
    f = p.p(t) - g.g(u)
    gu = g.g(u)
    cell = np.diff(t)
    if sol.int_f is not None:
        cum_f = sol.int_f
    else:
        cum_f = np.concatenate(([0.0], np.cumsum(0.5 * cell * (f[1:] + f[:-1]))))
    cum_g = np.concatenate(([0.0], np.cumsum(0.5 * cell * (gu[1:] + gu[:-1]))))
    span = t[-1] - t[0]
    S = sol.sup_norm
    g_lo, g_hi = float(g.g(np.array([-S]))[0]), float(g.g(np.array([S]))[0])
    out = {"windows": [], "A": p.average}
    for T in windows:
        if T > span * (1 + 1e-12):
            raise ValueError(f"window {T:g} longer than the solution span {span:g}")
        starts = np.linspace(t[0], t[-1] - T, n_positions) if T < span else np.array([t[0]])
        errs, means = [], []
        for s0 in starts:
            i = int(np.argmin(np.abs(t - s0)))
            j = int(np.argmin(np.abs(t - (t[i] + T))))
            if j <= i:
                continue
            Tw = t[j] - t[i]
            errs.append(abs((du[j] - du[i]) / Tw - (cum_f[j] - cum_f[i]) / Tw))
            means.append((cum_g[j] - cum_g[i]) / Tw)
        means = np.array(means)
        out["windows"].append({
            "T": float(T), "identity_error": float(max(errs)),
            "mean_g_min": float(means.min()), "mean_g_max": float(means.max()),
            "strictly_inside": bool(g.g_minus < means.min() and means.max() < g.g_plus),
            "within_g_of_sup": bool(g_lo - 1e-12 <= means.min() and means.max() <= g_hi + 1e-12),
            "deviation_from_average": float(np.max(np.abs(means - p.average))),
        })
    out["identity_tol"] = identity_tol
    out["passed"] = all(w["identity_error"] <= identity_tol and w["strictly_inside"] for w in out["windows"])
    return out


# ---------------------------------------------------------------------------
# subharmonics


@dataclass
class SubharmonicSolution:
    base_period: float
    multiplier: int
    zeros_per_period: int
    t0: float
    t_samples: np.ndarray
    u_samples: np.ndarray
    du_samples: np.ndarray
    closure_residuals: tuple
    glued: GluedSolution
    partition: PartitionResult
    t0_flat: bool = False
    t0_flat_gradient: float = 0.0

    @property
    def period(self) -> float:
        return self.base_period * self.multiplier

    def zero_count(self) -> int:
        return self.glued.sign_changes(self.t0, self.t0 + self.period)

    def to_csv(self, path) -> None:
        write_curve_csv(path, self.t_samples, self.u_samples, self.du_samples)


def solve_subharmonic(T: float, n: int, k: int, g: ReactionTerm, p: ForcingTerm,
                      opts: SolverOptions = SolverOptions(), L: Optional[float] = None,
                      H: Optional[float] = None, t0_init: float = 0.0) -> SubharmonicSolution:
    """nT-periodic solution with k (odd) zeros inside each period.

    The first gluing point t0 is an ascent variable; its derivative
    u_0'(t0+)^2/2 - u_k'((t0+nT)-)^2/2 vanishes exactly when the glued
    function closes up C^1 across the period.
    """
    if k < 1 or k % 2 == 0:
        raise ValueError("k must be odd")
    if p.period is None:
        raise NotPeriodic("subharmonics need a periodic forcing")
    if not math.isclose(p.period, T, rel_tol=1e-12) and not p.is_constant:
        raise ValueError(f"forcing period {p.period:g} differs from T = {T:g}")
    if L is None:
        L = opts.min_length if opts.min_length is not None else certify_spacing_floor(g, p, opts=opts).L
    span = n * T
    if span < (k + 1) * L:
        raise BoundaryStuck(f"nT = {span:g} < (k+1) L = {(k + 1) * L:g}; increase n")
    if H is not None and span < H * (k + 1):
        import warnings
        warnings.warn(f"nT = {span:g} below the heuristic threshold H(k+1) = {H * (k + 1):g}", stacklevel=2)
    sub = _with_floor(opts, L)
    signs = [1 if i % 2 == 0 else -1 for i in range(k + 1)]
    autonomous = p.is_constant
    r0 = np.cumsum(initial_lengths(span, signs, g, p))[:-1]
    x0 = np.concatenate(([0.0 if autonomous else t0_init], r0))

    def project(x):
        return np.concatenate((x[:1], project_spacing(x[1:], 0.0, span, L)))

    flat_grad = 0.0
    state = None
    node_counts = None
    x = project(x0)
    converged = False
    for sweep in range(2):
        e0 = np.concatenate(([0.0], x[1:], [span]))
        node_counts = tuple(nodes_for(e0[i], e0[i + 1], sub.h_target) for i in range(k + 1))

        def evaluate(xx, warm, node_counts=node_counts):
            edges = xx[0] + np.concatenate(([0.0], xx[1:], [span]))
            mins = _solve_pieces(edges, signs, g, p, sub, node_counts, warm)
            gr = corner_gradient(mins)
            d_t0 = 0.5 * mins[0].slope_a ** 2 - 0.5 * mins[-1].slope_b ** 2 + float(gr.sum())
            return math.fsum(m.phi for m in mins), np.concatenate(([0.0 if autonomous else d_t0], gr)), mins

        if autonomous and sweep == 0:
            _, gfull, mins0 = evaluate(x, None)
            flat_grad = abs(0.5 * mins0[0].slope_a ** 2 - 0.5 * mins0[-1].slope_b ** 2 + float(gfull[1:].sum()))
        state, its, converged, trace = projected_ascent(x, evaluate, project, sub)
        x = state.x
    if not converged:
        raise NonConvergence("subharmonic partition ascent did not converge")
    t0 = float(np.mod(x[0], T))
    shift = t0 - x[0]
    mins = state.mins
    if shift != 0.0:
        mins = _solve_pieces(t0 + np.concatenate(([0.0], x[1:], [span])), signs, g, p, sub, node_counts, mins)
    edges = t0 + np.concatenate(([0.0], x[1:], [span]))
    lengths = np.diff(edges)
    grad = corner_gradient(mins)
    interior = not bool(np.any(lengths <= L * (1 + 1e-9)))
    if not interior:
        raise BoundaryStuck("subharmonic partition touches the spacing floor; increase n")
    P = Partition(edges[0], edges[-1], tuple(edges[1:-1]), L, 1)
    pres = PartitionResult(partition=P, psi=math.fsum(m.phi for m in mins), gradient=grad,
                           grad_norm=float(np.max(np.abs(state.grad))), minimizers=mins,
                           corner_mismatches=np.abs(grad), interior=interior,
                           ratio_stats=ratio_stats(lengths), iterations=its, converged=converged,
                           node_counts=node_counts)
    glued = glue(mins, g, p, pres.max_corner_mismatch)
    slope_gap = abs(mins[-1].slope_b - mins[0].slope_a)
    value_gap = abs(glued.u_samples[-1] - glued.u_samples[0])
    # one period plus the first sample of the next one
    h0 = mins[0].u.h
    t_out = np.append(glued.t_samples, edges[-1] + h0)
    u_out = np.append(glued.u_samples, mins[0].u.values[0])
    du_end = 0.5 * (mins[-1].slope_b + mins[0].slope_a)
    du = glued.du_samples.copy()
    du[0] = du[-1] = du_end
    du_out = np.append(du, (mins[0].u.values[1]) / (2 * h0))
    return SubharmonicSolution(T, n, k, t0, t_out, u_out, du_out, (float(value_gap), float(slope_gap)),
                               glued, pres, t0_flat=autonomous, t0_flat_gradient=flat_grad)


def _divisors(n: int) -> list[int]:
    return [d for d in range(1, n) if n % d == 0]


def minimal_period_certificate(sol: SubharmonicSolution, threshold: float = 0.05) -> dict:
    """Shift the periodic profile by every proper divisor d T of nT and measure
    max |u(t + dT) - u(t)| / max |u|; all must exceed the threshold."""
    t = sol.glued.t_samples[:-1]
    u = sol.glued.u_samples[:-1]
    P = sol.period
    scale = float(np.max(np.abs(u)))
    dense = np.linspace(sol.t0, sol.t0 + P, 20 * t.size, endpoint=False)
    base = np.interp(dense, t, u, period=P)
    rel = {}
    for d in _divisors(sol.multiplier):
        shifted = np.interp(dense + d * sol.base_period, t, u, period=P)
        rel[d] = float(np.max(np.abs(shifted - base)) / scale)
    return {"relative_gaps": rel, "passed": all(v > threshold for v in rel.values()),
            "coprime": math.gcd(sol.multiplier, sol.zeros_per_period + 1) == 1}


# ---------------------------------------------------------------------------
# exhaustion


def _sample_on(sol: GluedSolution, grid, shift=0.0):
    return (np.interp(grid + shift, sol.t_samples, sol.u_samples),
            np.interp(grid + shift, sol.t_samples, sol.du_samples))


def _aligned_difference(s1: GluedSolution, s2: GluedSolution, W: float, max_shift: float, autonomous: bool):
    grid = np.linspace(-W, W, 4001)
    u2, du2 = _sample_on(s2, grid)

    def diff(shift):
        u1, _ = _sample_on(s1, grid, shift)
        return float(np.max(np.abs(u1 - u2)))

    shift = 0.0
    if autonomous:
        cands = np.linspace(-max_shift, max_shift, 801)
        vals = [diff(c) for c in cands]
        c = cands[int(np.argmin(vals))]
        step = cands[1] - cands[0]
        res = optimize.minimize_scalar(diff, bounds=(c - step, c + step), method="bounded",
                                       options={"xatol": 1e-6})
        shift = float(res.x) if res.fun <= min(vals) else float(c)
    u1, du1 = _sample_on(s1, grid, shift)
    return float(np.max(np.abs(u1 - u2))), float(np.max(np.abs(du1 - du2))), shift


def exhaustion_sweep(mu: float, n_values: Sequence[int], g: ReactionTerm, p: ForcingTerm,
                     opts: SolverOptions = SolverOptions(), L: Optional[float] = None,
                     window: float = 20.0):
    """Solutions on (-mu n, mu n) with 2n-1 zeros and central-window C^1 differences.

    The start sign alternates with n so that the piece beginning near t = 0
    is positive in every member; otherwise consecutive members would have
    opposite signs around the origin.
    """
    n_values = list(n_values)
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise ValueError("n_values must be increasing")
    if L is None:
        L = opts.min_length if opts.min_length is not None else certify_spacing_floor(g, p, opts=opts).L
    sols, results, errors = [], [], []
    for n in n_values:
        try:
            res = maximize_partition(-mu * n, mu * n, 2 * n - 1, (-1) ** n, g, p, opts, L=L)
        except Exception as exc:  # partial results are kept
            errors.append({"n": n, "error": repr(exc)})
            continue
        results.append((n, res))
        sols.append((n, assemble(res, g, p)))
    autonomous = p.is_constant
    diffs = []
    for (n1, s1), (n2, s2) in zip(sols, sols[1:]):
        du0, ddu, shift = _aligned_difference(s1, s2, window, mu, autonomous)
        diffs.append({"n": n1, "n_next": n2, "sup_u": du0, "sup_du": ddu, "c1": max(du0, ddu), "shift": shift})
    # same-parity members share the zero pattern near the origin when the
    # positive and negative pieces have unequal lengths
    parity = []
    by_n = dict(sols)
    for n1, s1 in sols:
        if n1 + 2 in by_n:
            du0, ddu, shift = _aligned_difference(s1, by_n[n1 + 2], window, mu, autonomous)
            parity.append({"n": n1, "n_next": n1 + 2, "sup_u": du0, "sup_du": ddu, "c1": max(du0, ddu),
                           "shift": shift})
    report = {"mu": mu, "window": window, "differences": diffs, "parity_differences": parity,
              "errors": errors, "aligned": autonomous}
    if results:
        diag = ratio_diagnostics([r for _, r in results])
        h_star = diag["h_star"]
        C = g.sup_norm + p.sup_norm
        C1 = make_bracket(g, p, 0.0).C1_min
        lo, hi = C1 * (mu / h_star) ** 2, C * (h_star * mu) ** 2
        report.update({"h_star": h_star, "h_bar": diag["h_bar"], "norm_lower": lo, "norm_upper": hi,
                       "sandwich": [{"n": n, "sup_norm": s.sup_norm, "ok": lo <= s.sup_norm <= hi,
                                     "slope_ok": s.slope_sup_norm <= C * h_star * mu} for n, s in sols]})
        trend = [d["c1"] for d in diffs]
        report["non_increasing"] = all(b <= a for a, b in zip(trend, trend[1:]))
    return [s for _, s in sols], report


def mu_separation_ok(mu_prev: float, mu_next: float, g: ReactionTerm, p: ForcingTerm, h_star: float) -> bool:
    """mu_next > sqrt(C/C1) h*^2 mu_prev guarantees distinct sup norms."""
    C = g.sup_norm + p.sup_norm
    C1 = make_bracket(g, p, 0.0).C1_min
    return mu_next > math.sqrt(C / C1) * h_star ** 2 * mu_prev
