"""One-signed minimizers of the action on an interval.

phi^+(a, b) is the minimum of J over nonnegative functions vanishing at a and
b, phi^- the same over nonpositive ones.  Both are computed in the variable
v = sign * u >= 0 by a projected Newton method with an active set on the bound
and Armijo backtracking along the projection arc.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .errors import (CertificationFailed, EigSolveFailure, NoInteriorSolution, NonConvergence,
                     NonPositiveK)
from .functional import GridFunction, action, nodes_for
from .problem import ForcingTerm, ReactionTerm, landesman_lazer_margin, margin_for_sign

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-9             # KKT residual, scaled variables
    max_iter: int = 200
    h_target: float = 0.05
    min_length: Optional[float] = None
    n_starts: int = 10
    seed: int = 0
    outer_tol: float = 1e-9       # partition ascent: grad_norm <= outer_tol * (1 + |psi|)
    max_outer_iter: int = 400
    mismatch_tol: float = 1e-4    # corner mismatch, relative to 1 + slope^2
    workers: int = 1
    degenerate_threshold: float = 1e-8


@dataclass
class SignedMinimizerResult:
    u: GridFunction
    sign: int
    phi: float
    slope_a: float
    slope_b: float
    kkt_residual: float
    active_set_size: int
    lambda_min: float
    iterations: int = 0
    n_starts: int = 1
    max_pair_distance: float = 0.0
    certified: bool = True

    @property
    def a(self) -> float:
        return self.u.a

    @property
    def b(self) -> float:
        return self.u.b

    @property
    def length(self) -> float:
        return self.u.b - self.u.a

    @property
    def interior(self) -> bool:
        return self.active_set_size == 0


def _sign(sign) -> int:
    if sign in (1, "+", "plus"):
        return 1
    if sign in (-1, "-", "minus"):
        return -1
    raise ValueError(f"sign must be +1/-1 or '+'/'-', got {sign!r}")


def limit_profile(a: float, b: float, n: int, k: float) -> np.ndarray:
    """(b-a)^2 w_k((t-a)/(b-a)) at the interior nodes."""
    tau = np.arange(1, n + 1) / (n + 1)
    return (b - a) ** 2 * 0.5 * k * tau * (1.0 - tau)


def rescale_guess(u0: GridFunction, a: float, b: float, n: int, sign: int) -> np.ndarray:
    """Transport a previous minimizer to (a, b) through the unit-interval scaling."""
    tau_new = np.arange(1, n + 1) / (n + 1)
    tau_old = np.arange(0, u0.n + 2) / (u0.n + 1)
    vhat = sign * u0.full_values() / (u0.b - u0.a) ** 2
    return np.maximum(np.interp(tau_new, tau_old, vhat), 0.0) * (b - a) ** 2


def _tridiag_solve(diag, off, rhs, link):
    """Solve the symmetric tridiagonal system, shifting the diagonal if it is not PD.

    ``link[i]`` says whether off[i] couples unknowns i and i+1.
    """
    offm = np.where(link, off, 0.0)
    shift = 0.0
    scale = float(np.max(np.abs(diag)))
    for _ in range(30):
        ab = np.empty((2, diag.size))
        ab[0, 0] = 0.0
        ab[0, 1:] = offm
        ab[1] = diag + shift
        try:
            cb = linalg.cholesky_banded(ab, lower=False, check_finite=False)
            return linalg.cho_solve_banded((cb, False), rhs, check_finite=False), shift
        except linalg.LinAlgError:
            shift = max(10.0 * shift, 1e-8 * scale)
    raise NonConvergence("could not regularise the reduced Hessian")


def minimize_signed(a: float, b: float, sign, g: ReactionTerm, p: ForcingTerm,
                    opts: SolverOptions = SolverOptions(), *, n: Optional[int] = None,
                    u0: Optional[GridFunction] = None, check_interior: bool = True,
                    compute_eigenvalue: bool = True) -> SignedMinimizerResult:
    s = _sign(sign)
    length = b - a
    if length <= 0:
        raise ValueError("need b > a")
    if opts.min_length is not None and length < opts.min_length * (1 - 1e-12):
        raise ValueError(f"interval length {length:g} below the spacing floor {opts.min_length:g}")
    n = n or nodes_for(a, b, opts.h_target)
    h = length / (n + 1)
    t = a + h * np.arange(1, n + 1)
    pt = p.p(t)
    L2 = length * length

    if u0 is not None:
        v = rescale_guess(u0, a, b, n, s)
    else:
        k = margin_for_sign(g, p, s)
        if k <= 0:
            raise NonPositiveK(f"margin on the {'+' if s > 0 else '-'} side is {k:g}")
        v = limit_profile(a, b, n, k)

    def energy(vv):
        uu = s * vv
        full = np.concatenate(([0.0], uu, [0.0]))
        return 0.5 * float(np.sum(np.diff(full) ** 2)) / h + h * float(np.sum(pt * uu - g.G(uu)))

    def residual_v(vv):
        uu = s * vv
        full = np.concatenate(([0.0], uu, [0.0]))
        r = -(full[2:] - 2.0 * full[1:-1] + full[:-2]) / (h * h) - g.g(uu) + pt
        return s * r

    off = np.full(n - 1, -1.0 / (h * h))
    f = energy(v)
    kkt = math.inf
    converged = False
    it = 0
    for it in range(opts.max_iter + 1):
        rv = residual_v(v)
        kkt = float(np.max(np.abs(np.minimum(v / L2, rv))))
        floor = 32.0 * _EPS * (float(np.max(v)) / (h * h) + g.sup_norm + p.sup_norm)
        if kkt <= opts.tol + floor:
            converged = True
            break
        if it == opts.max_iter:
            break
        w = float(np.max(np.abs(v - np.maximum(0.0, v - L2 * rv))))
        eps_act = min(1e-6 * L2, w)
        active = (v <= eps_act) & (rv > 0)
        free = ~active
        diag = 2.0 / (h * h) - g.dg(s * v)
        d = np.zeros(n)
        if active.any():
            d[active] = -rv[active] / diag[active]
        fi = np.flatnonzero(free)
        if fi.size:
            link = np.diff(fi) == 1
            d_f, _ = _tridiag_solve(diag[fi], off[fi[:-1]] if fi.size > 1 else off[:0], -rv[fi], link)
            d[fi] = d_f
        # Armijo along the projection arc; gradient of f is h * rv
        alpha = 1.0
        fscale = abs(f) + 1.0
        accepted = False
        for _ in range(60):
            v_new = np.maximum(0.0, v + alpha * d)
            f_new = energy(v_new)
            pred = h * (alpha * float(np.dot(-rv[free], d[free]))
                        + float(np.dot(rv[active], v[active] - v_new[active])))
            if f - f_new >= 1e-4 * pred or (pred <= 1e3 * _EPS * fscale and f_new <= f + 1e3 * _EPS * fscale):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        v, f = v_new, f_new
    if not converged:
        raise NonConvergence(f"projected Newton stopped at KKT residual {kkt:.3e} after {it} iterations "
                             f"on ({a:g}, {b:g}), sign {s:+d}")

    u = GridFunction(a, b, s * v)
    active_size = int(np.count_nonzero(v <= 0.0))
    if check_interior and opts.min_length is not None and active_size > 0:
        raise NoInteriorSolution(f"minimizer on ({a:g}, {b:g}) vanishes at {active_size} interior nodes; "
                                 "the spacing floor is too small")
    slope_a, slope_b = end_slopes(u, g, p)
    lam = nondegeneracy_eigenvalue(u, g) if compute_eigenvalue else math.nan
    return SignedMinimizerResult(
        u=u, sign=s, phi=action(u, g, p).value, slope_a=float(slope_a), slope_b=float(slope_b),
        kkt_residual=kkt, active_set_size=active_size, lambda_min=lam, iterations=it,
        certified=bool(not compute_eigenvalue or lam > opts.degenerate_threshold))


def _dp(p: ForcingTerm, t: float) -> float:
    step = 1e-4 * (1.0 + abs(t))
    lo, hi = p.p(np.array([t - step, t + step]))
    return float(hi - lo) / (2 * step)


def end_slopes(u: GridFunction, g: ReactionTerm, p: ForcingTerm) -> tuple[float, float]:
    """One-sided slopes at a and b, corrected with the equation itself:
    u'' = p - g(0) and u''' = p' - g'(0) u' where u vanishes.

    The h^2 coefficient is 1/12 rather than the Taylor value 1/6 because the
    nodal values of the three-point scheme carry an O(h^2) error of the same
    form; with 1/12 the two cancel and the slopes converge at fourth order.
    """
    h = u.h
    z = np.array([0.0])
    g0, dg0 = float(g.g(z)[0]), float(g.dg(z)[0])
    pa, pb = p.p(np.array([u.a, u.b]))
    c = 1.0 - dg0 * h * h / 12.0
    slope_a = (u.values[0] / h - 0.5 * h * (pa - g0) - h * h / 12.0 * _dp(p, u.a)) / c
    slope_b = (-u.values[-1] / h + 0.5 * h * (pb - g0) - h * h / 12.0 * _dp(p, u.b)) / c
    return float(slope_a), float(slope_b)


def boundary_slopes(r: SignedMinimizerResult) -> tuple[float, float]:
    """u'(a+) and u'(b-) as computed by ``end_slopes`` at solve time."""
    return r.slope_a, r.slope_b


def phi_derivatives(r: SignedMinimizerResult) -> tuple[float, float]:
    """(d phi/da, d phi/db) = (u'(a+)^2 / 2, -u'(b-)^2 / 2)."""
    return 0.5 * r.slope_a ** 2, -0.5 * r.slope_b ** 2


def nondegeneracy_eigenvalue(r, g: ReactionTerm, rtol: float = 1e-10) -> float:
    """Smallest eigenvalue of psi -> -psi'' - g'(u) psi with Dirichlet conditions."""
    u = r.u if isinstance(r, SignedMinimizerResult) else r
    h = u.h
    diag = 2.0 / (h * h) - g.dg(u.values)
    off = np.full(u.n - 1, -1.0 / (h * h))
    try:
        lam, vec = linalg.eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    except (linalg.LinAlgError, ValueError) as exc:
        raise EigSolveFailure(str(exc)) from exc
    psi = vec[:, 0]
    Mpsi = diag * psi
    Mpsi[:-1] += off * psi[1:]
    Mpsi[1:] += off * psi[:-1]
    res = float(np.max(np.abs(Mpsi - lam[0] * psi)))
    if not res <= rtol * float(np.max(np.abs(diag)) + 2.0 / (h * h)):
        raise EigSolveFailure(f"eigen-residual {res:.3e} too large")
    return float(lam[0])


def _random_profile(rng: np.random.Generator, a, b, n, k):
    tau = np.arange(1, n + 1) / (n + 1)
    coeffs = rng.normal(0.0, 0.5, size=5) / np.arange(1, 6)
    bump = np.exp(sum(c * np.sin((j + 1) * np.pi * tau) for j, c in enumerate(coeffs)))
    return (b - a) ** 2 * 0.5 * k * rng.uniform(0.25, 4.0) * tau * (1.0 - tau) * bump


def uniqueness_probe(a: float, b: float, sign, g: ReactionTerm, p: ForcingTerm, n_starts: int = 10,
                     seed: int = 0, opts: SolverOptions = SolverOptions(), n: Optional[int] = None):
    """Minimize from several starts; returns (max pairwise sup-distance, results)."""
    s = _sign(sign)
    n = n or nodes_for(a, b, opts.h_target)
    k = margin_for_sign(g, p, s)
    rng = np.random.default_rng(seed)
    base = limit_profile(a, b, n, k)
    results = []
    for i in range(n_starts):
        if i < 5:
            guess = (0.25, 0.5, 1.0, 2.0, 4.0)[i] * base
        else:
            guess = _random_profile(rng, a, b, n, k)
        u0 = GridFunction(a, b, s * guess)
        results.append(minimize_signed(a, b, s, g, p, opts, n=n, u0=u0))
    dist = 0.0
    for i in range(len(results)):
        for j in range(i + 1, len(results)):
            dist = max(dist, float(np.max(np.abs(results[i].u.values - results[j].u.values))))
    results = [dataclasses.replace(r, n_starts=n_starts, max_pair_distance=dist) for r in results]
    return dist, results


# ---------------------------------------------------------------------------
# energy bracket and spacing floor


@dataclass
class EnergyBracket:
    alpha_lower: float
    alpha_upper: float
    beta_lower: float
    beta_upper: float
    epsilon: float
    L: float
    C1: float            # + side
    C1_minus: float
    ordering: str
    rel_alpha_beta: bool
    diagnostics: list = field(default_factory=list)

    def bounds(self, sign) -> tuple[float, float]:
        """Admissible range of phi/(b-a)^3 for the given sign."""
        if _sign(sign) > 0:
            return -self.alpha_lower, -self.alpha_upper
        return -self.beta_lower, -self.beta_upper

    @property
    def C1_min(self) -> float:
        return min(self.C1, self.C1_minus)


def rel_alpha_beta_holds(k_plus: float, k_minus: float, eps: float) -> bool:
    """Order-agnostic check of  s_lo / (1 + sqrt(s_lo / l_lo))^2 < s_up,
    with s the smaller-margin side and l the larger."""
    ks, kl = sorted((k_plus, k_minus))
    s_lo, s_up = ks * ks / 24 + eps, ks * ks / 24 - eps
    l_lo = kl * kl / 24 + eps
    return s_lo / (1.0 + math.sqrt(s_lo / l_lo)) ** 2 < s_up


def make_bracket(g: ReactionTerm, p: ForcingTerm, eps: float, L: float = math.nan) -> EnergyBracket:
    m = landesman_lazer_margin(g, p)
    kp, km = m.upper_margin, m.lower_margin
    ca, cb = kp * kp / 24, km * km / 24
    names = {"alpha_lower": ca + eps, "alpha_upper": ca - eps, "beta_lower": cb + eps, "beta_upper": cb - eps}
    ordering = " < ".join(sorted(names, key=lambda key: (names[key], key)))
    denom = g.sup_norm + p.M1
    return EnergyBracket(names["alpha_lower"], names["alpha_upper"], names["beta_lower"], names["beta_upper"],
                         eps, L, ca / denom, cb / denom, ordering, rel_alpha_beta_holds(kp, km, eps))


def default_bracket_eps(g: ReactionTerm, p: ForcingTerm) -> float:
    m = landesman_lazer_margin(g, p)
    k = min(m.upper_margin, m.lower_margin)
    eps = 0.01 * k * k
    while not rel_alpha_beta_holds(m.upper_margin, m.lower_margin, eps):
        eps *= 0.5
    return eps


def certify_spacing_floor(g: ReactionTerm, p: ForcingTerm, bracket_eps: Optional[float] = None,
                          lengths: Sequence[float] = (10, 15, 20, 30, 40),
                          opts: SolverOptions = SolverOptions(), a: float = 0.0) -> EnergyBracket:
    """Smallest tested length from which on every check passes for both signs.

    Checks per (length, sign): no contact with zero inside, lambda_min > 0,
    and phi/(b-a)^3 inside the bracket.
    """
    m = landesman_lazer_margin(g, p)
    if not m.ok:
        raise CertificationFailed(f"Landesman-Lazer condition fails: margins {m.lower_margin:g}, "
                                  f"{m.upper_margin:g}")
    eps = default_bracket_eps(g, p) if bracket_eps is None else float(bracket_eps)
    kmin = min(m.upper_margin, m.lower_margin)
    if not 0 < eps < kmin * kmin / 24:
        raise CertificationFailed(f"bracket epsilon {eps:g} must lie in (0, k^2/24 = {kmin * kmin / 24:.3e})")
    bracket = make_bracket(g, p, eps)
    free_opts = dataclasses.replace(opts, min_length=None)
    diagnostics = []
    for length in sorted(lengths):
        row = {"length": float(length)}
        ok = True
        for s in (1, -1):
            lo, hi = bracket.bounds(s)
            try:
                r = minimize_signed(a, a + length, s, g, p, free_opts)
            except Exception as exc:  # recorded, the length simply does not qualify
                row[f"error{s:+d}"] = repr(exc)
                ok = False
                continue
            ratio = r.phi / length ** 3
            tag = "+" if s > 0 else "-"
            row.update({f"ratio{tag}": ratio, f"lambda_min{tag}": r.lambda_min,
                        f"active{tag}": r.active_set_size})
            ok &= r.active_set_size == 0 and r.lambda_min > 0 and lo <= ratio <= hi
        row["ok"] = bool(ok)
        diagnostics.append(row)
    L = None
    for i in range(len(diagnostics)):
        if all(d["ok"] for d in diagnostics[i:]):
            L = diagnostics[i]["length"]
            break
    if L is None:
        raise CertificationFailed("no tested length passes all checks", diagnostics)
    bracket.L = L
    bracket.diagnostics = diagnostics
    return bracket
