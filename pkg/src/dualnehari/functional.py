"""Discrete action functional on H^1_0(a, b).

Grid: n interior nodes t_i = a + i h, i = 1..n, h = (b - a)/(n + 1); the
endpoint values are structurally zero.  Kinetic energy uses linear elements,
potential and forcing terms the trapezoid rule, so the discrete
Euler-Lagrange equations are the standard three-point scheme

    -(u_{i+1} - 2 u_i + u_{i-1})/h^2 - g(u_i) + p(t_i) = 0.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import GridMismatch, NonPositiveK
from .problem import ForcingTerm, ReactionTerm


@dataclass(frozen=True)
class GridFunction:
    a: float
    b: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if not self.b - self.a > 0:
            raise ValueError(f"empty interval ({self.a}, {self.b})")
        if vals.ndim != 1 or vals.size < 3:
            raise ValueError("need at least 3 interior nodes")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.a + self.h * np.arange(1, self.n + 1)

    def full_nodes(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.n + 2)

    def full_values(self) -> np.ndarray:
        return np.concatenate(([0.0], self.values, [0.0]))

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.a, self.b, values)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "u"])
            for t, u in zip(self.full_nodes(), self.full_values()):
                w.writerow([repr(float(t)), repr(float(u))])


def read_grid_csv(path) -> GridFunction:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return GridFunction(data[0, 0], data[-1, 0], data[1:-1, 1])


def nodes_for(a: float, b: float, h_target: float) -> int:
    """Interior node count giving spacing <= h_target (at least 3)."""
    return max(3, int(np.ceil((b - a) / h_target)) - 1)


def sample(f, a: float, b: float, n: int) -> GridFunction:
    h = (b - a) / (n + 1)
    t = a + h * np.arange(1, n + 1)
    return GridFunction(a, b, np.asarray(f(t), dtype=float))


class ActionValue(NamedTuple):
    value: float
    kinetic: float
    potential: float
    forcing: float


def _second_difference(v: np.ndarray, h: float) -> np.ndarray:
    full = np.concatenate(([0.0], v, [0.0]))
    return (full[2:] - 2.0 * full[1:-1] + full[:-2]) / (h * h)


def action(u: GridFunction, g: ReactionTerm, p: ForcingTerm) -> ActionValue:
    h = u.h
    full = u.full_values()
    kinetic = 0.5 * float(np.sum(np.diff(full) ** 2)) / h
    potential = h * float(np.sum(g.G(u.values)))
    forcing = h * float(np.sum(p.p(u.nodes) * u.values))
    return ActionValue(kinetic - potential + forcing, kinetic, potential, forcing)


def el_residual(u: GridFunction, g: ReactionTerm, p: ForcingTerm) -> np.ndarray:
    """Pointwise residual -u'' - g(u) + p at interior nodes."""
    return -_second_difference(u.values, u.h) - g.g(u.values) + p.p(u.nodes)


def action_gradient(u: GridFunction, g: ReactionTerm, p: ForcingTerm) -> GridFunction:
    return u.with_values(u.h * el_residual(u, g, p))


def hessian_bands(u: GridFunction, g: ReactionTerm) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the (symmetric tridiagonal) action Hessian."""
    h = u.h
    diag = h * (2.0 / (h * h) - g.dg(u.values))
    off = np.full(u.n - 1, -1.0 / h)
    return diag, off


def action_hessian_apply(u: GridFunction, v: GridFunction, g: ReactionTerm) -> GridFunction:
    if u.n != v.n or u.a != v.a or u.b != v.b:
        raise GridMismatch("u and v live on different grids")
    h = u.h
    return v.with_values(h * (-_second_difference(v.values, h) - g.dg(u.values) * v.values))


def scale_to_unit(u: GridFunction) -> GridFunction:
    """u(t) -> (b-a)^-2 u(a + t(b-a)) on (0, 1), same node count."""
    L = u.b - u.a
    return GridFunction(0.0, 1.0, u.values / (L * L))


def unscale(uhat: GridFunction, a: float, b: float) -> GridFunction:
    L = b - a
    return GridFunction(a, b, uhat.values * (L * L))


def scaled_action(uhat: GridFunction, a: float, b: float, g: ReactionTerm, p: ForcingTerm) -> float:
    """Scaled functional on (0,1): J_(a,b)(u) = (b-a)^3 * scaled_action(uhat)."""
    L = b - a
    hh = uhat.h
    full = uhat.full_values()
    kinetic = 0.5 * float(np.sum(np.diff(full) ** 2)) / hh
    potential = hh * float(np.sum(g.G(L * L * uhat.values))) / (L * L)
    forcing = hh * float(np.sum(p.p(a + L * uhat.nodes) * uhat.values))
    return kinetic - potential + forcing


def limit_minimizer(k: float, n: int) -> tuple[GridFunction, float]:
    """w_k(t) = k t (1 - t)/2 sampled on (0,1), with exact value -k^2/24."""
    if k <= 0:
        raise NonPositiveK(f"limit source k = {k:g} must be positive")
    w = sample(lambda t: 0.5 * k * t * (1.0 - t), 0.0, 1.0, n)
    return w, -k * k / 24.0
