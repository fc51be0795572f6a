"""Independent checks for the grid solvers.

The shooting solver integrates the equation with an adaptive Runge-Kutta
scheme and never touches the discrete functional, so agreement with
``minimize_signed`` is evidence rather than a tautology.  The finite-difference
and brute-force oracles do re-use the one-signed minimizer (they test the
derivative formula and the partition ascent, not the minimizer itself).
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import NoBracket, NonConvergence, SignViolation
from .functional import nodes_for
from .partition import Partition
from .problem import ForcingTerm, ReactionTerm, margin_for_sign
from .signed import SolverOptions, _sign, minimize_signed

_RTOL = 1e-10
_ATOL = 1e-10


@dataclass
class ShootingResult:
    initial_slope: float
    trajectory: np.ndarray          # columns t, u, du
    endpoint_value: float
    bisection_iters: int
    final_slope: float = float("nan")
    _dense: object = field(default=None, repr=False)

    def __call__(self, t) -> np.ndarray:
        """u at arbitrary times, from the integrator's dense output."""
        return self._dense(np.asarray(t, dtype=float))[0]

    def slope(self, t) -> np.ndarray:
        return self._dense(np.asarray(t, dtype=float))[1]


def _rhs(g: ReactionTerm, p: ForcingTerm):
    def f(t, y):
        return [y[1], float(p.p(np.array([t]))[0] - g.g(np.array([y[0]]))[0])]
    return f


def _shoot(a, b, sign, slope, g, p, terminal=True, dense=False):
    def crossing(t, y):
        return sign * y[0]
    crossing.terminal = terminal
    crossing.direction = -1
    return solve_ivp(_rhs(g, p), (a, b), [0.0, sign * slope], method="RK45", rtol=_RTOL, atol=_ATOL,
                     events=crossing if terminal else None, dense_output=dense)


def _indicator(a, b, sign, slope, g, p):
    """Monotone in the slope: -(distance still to go) if the shot lands early,
    otherwise the signed endpoint value."""
    sol = _shoot(a, b, sign, slope, g, p)
    if sol.t_events[0].size and sol.t_events[0][0] < b:
        return -(b - float(sol.t_events[0][0]))
    return sign * float(sol.y[0, -1])


def default_slope_bracket(a: float, b: float, sign, g: ReactionTerm, p: ForcingTerm) -> tuple[float, float]:
    """Limit-profile slope k(b-a)/2, widened by [0.2, 5]."""
    k = margin_for_sign(g, p, _sign(sign))
    if k <= 0:
        k = 1.0
    s0 = 0.5 * k * (b - a)
    return 0.2 * s0, 5.0 * s0


def shoot_bvp(a: float, b: float, sign, g: ReactionTerm, p: ForcingTerm,
              slope_bracket: Optional[tuple[float, float]] = None, tol: float = 1e-7,
              max_iter: int = 60, n_samples: int = 2001) -> ShootingResult:
    """Solve u'' = p - g(u), u(a) = u(b) = 0, sign*u > 0 inside, by bisection on |u'(a)|.

    The bracket holds slope magnitudes; the shot starts with slope
    sign * s.  Raises NoBracket when the bracket does not straddle the root
    and SignViolation when the converged trajectory is not one-signed.
    """
    sign = _sign(sign)
    lo, hi = slope_bracket if slope_bracket is not None else default_slope_bracket(a, b, sign, g, p)
    f_lo = _indicator(a, b, sign, lo, g, p)
    f_hi = _indicator(a, b, sign, hi, g, p)
    if f_lo > 0 or f_hi < 0:
        raise NoBracket(f"slopes {lo:g}, {hi:g} give indicator values {f_lo:.3g}, {f_hi:.3g}")
    it = 0
    s = hi if abs(f_hi) < abs(f_lo) else lo
    f_s = f_hi if s == hi else f_lo
    while abs(f_s) > tol:
        if it >= max_iter:
            raise NonConvergence(f"shooting: |u(b)| = {abs(f_s):.3g} after {it} bisections")
        s = 0.5 * (lo + hi)
        f_s = _indicator(a, b, sign, s, g, p)
        if f_s < 0:
            lo = s
        else:
            hi = s
        it += 1
    sol = _shoot(a, b, sign, s, g, p, terminal=False, dense=True)
    t = np.linspace(a, b, n_samples)
    y = sol.sol(t)
    inner = sign * y[0, 1:-1]
    if inner.size and inner.min() < -tol:
        t_bad = float(t[1:-1][np.argmin(inner)])
        raise SignViolation(f"trajectory leaves the {'+' if sign > 0 else '-'} cone near t = {t_bad:g}")
    return ShootingResult(initial_slope=sign * s, trajectory=np.column_stack([t, y[0], y[1]]),
                          endpoint_value=float(y[0, -1]), bisection_iters=it,
                          final_slope=float(y[1, -1]), _dense=sol.sol)


def shooting_gap(a: float, b: float, sign, g: ReactionTerm, p: ForcingTerm, h: float,
                 opts: SolverOptions = SolverOptions(), shot: Optional[ShootingResult] = None) -> float:
    """Sup-distance at the grid nodes between the grid minimizer and the shot."""
    shot = shot if shot is not None else shoot_bvp(a, b, sign, g, p)
    r = minimize_signed(a, b, sign, g, p, opts, n=nodes_for(a, b, h))
    return float(np.max(np.abs(r.u.values - shot(r.u.nodes))))


def fd_phi_derivative(a: float, b: float, sign, g: ReactionTerm, p: ForcingTerm, delta: float = 0.01,
                      opts: SolverOptions = SolverOptions(), n: Optional[int] = None) -> tuple[float, float]:
    """Central differences of phi in a and b from four re-minimizations.

    The node count is frozen at the base interval's value so the grid-size
    jump does not enter the quotient.
    """
    if opts.min_length is not None and b - a - 2 * delta < opts.min_length:
        raise ValueError(f"(b - a) - 2 delta = {b - a - 2 * delta:g} is below the spacing floor")
    n = n if n is not None else nodes_for(a, b, opts.h_target)

    def phi(aa, bb):
        return minimize_signed(aa, bb, sign, g, p, opts, n=n, compute_eigenvalue=False).phi

    da = (phi(a + delta, b) - phi(a - delta, b)) / (2 * delta)
    db = (phi(a, b + delta) - phi(a, b - delta)) / (2 * delta)
    return da, db


@dataclass
class BruteForceResult:
    partition: Partition
    psi: float
    table: np.ndarray       # columns t_1..t_k, psi
    grid_step: float

    def to_csv(self, path) -> None:
        k = self.table.shape[1] - 1
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"t{i + 1}" for i in range(k)] + ["psi"])
            for row in self.table:
                w.writerow([repr(float(x)) for x in row])


def brute_force_partition(A: float, B: float, k: int, grid_step: float, g: ReactionTerm, p: ForcingTerm,
                          opts: SolverOptions = SolverOptions(), L: Optional[float] = None,
                          start_sign=1) -> BruteForceResult:
    """psi on every admissible grid partition with k in {1, 2}; returns the argmax and the table."""
    if k not in (1, 2):
        raise ValueError("brute force is limited to k = 1 or 2")
    L = L if L is not None else (opts.min_length or 0.0)
    if (B - A) / grid_step > 200:
        raise ValueError("grid too fine: more than 200 candidates per coordinate")
    if B - A < (k + 1) * L:
        raise ValueError(f"(B - A) = {B - A:g} < (k + 1) L = {(k + 1) * L:g}")
    start_sign = _sign(start_sign)
    candidates = A + grid_step * np.arange(int(np.floor((B - A) / grid_step + 1e-9)) + 1)
    slack = 1e-9 * grid_step
    cache: dict = {}

    def phi(lo, hi, s):
        key = (round(lo / grid_step), round(hi / grid_step), s)
        if key not in cache:
            cache[key] = minimize_signed(lo, hi, s, g, p, opts, n=nodes_for(lo, hi, opts.h_target),
                                         compute_eigenvalue=False).phi
        return cache[key]

    rows = []
    for pts in itertools.combinations(candidates, k):
        edges = (A,) + tuple(pts) + (B,)
        if np.min(np.diff(edges)) < L - slack:
            continue
        psi = sum(phi(lo, hi, start_sign * (-1) ** i) for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])))
        rows.append(tuple(pts) + (psi,))
    if not rows:
        raise ValueError("no admissible grid partition")
    table = np.array(rows)
    best = table[int(np.argmax(table[:, -1]))]
    return BruteForceResult(partition=Partition(A, B, best[:-1], L, start_sign), psi=float(best[-1]),
                            table=table, grid_step=grid_step)
