"""Reaction term g, forcing p, and the hypothesis checks on them.

g is a bounded, strictly increasing C^2 function with g(0) = 0, concave on
the positive axis and convex on the negative one.  p is bounded and has an
asymptotic average A(p).  Both are supplied as closed-form, vectorised
evaluators together with the metadata (limits, primitive, averages) that the
solvers need; nothing is extrapolated numerically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import NonFiniteValue, NotPeriodic

Func = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ReactionTerm:
    g: Func
    dg: Func
    d2g: Func
    G: Func
    g_minus: float
    g_plus: float
    name: str = "custom"

    @property
    def sup_norm(self) -> float:
        return max(abs(self.g_minus), abs(self.g_plus))


def _atan_family(scale: float, width: float) -> ReactionTerm:
    c, w = float(scale), float(width)

    def g(s):
        return c * np.arctan(np.asarray(s, dtype=float) / w)

    def dg(s):
        x = np.asarray(s, dtype=float) / w
        return c / (w * (1.0 + x * x))

    def d2g(s):
        x = np.asarray(s, dtype=float) / w
        return -2.0 * c * x / (w * w * (1.0 + x * x) ** 2)

    def G(s):
        x = np.asarray(s, dtype=float) / w
        return c * w * (x * np.arctan(x) - 0.5 * np.log1p(x * x))

    return ReactionTerm(g, dg, d2g, G, -c * math.pi / 2, c * math.pi / 2,
                        name=f"atan(scale={c:g},width={w:g})")


def _tanh_family(scale: float, width: float) -> ReactionTerm:
    c, w = float(scale), float(width)

    def g(s):
        return c * np.tanh(np.asarray(s, dtype=float) / w)

    def dg(s):
        x = np.asarray(s, dtype=float) / w
        return c / (w * np.cosh(x) ** 2)

    def d2g(s):
        x = np.asarray(s, dtype=float) / w
        t = np.tanh(x)
        return -2.0 * c * t * (1.0 - t * t) / (w * w)

    def G(s):
        # w*log(cosh(x)), written to avoid overflow for large |x|
        x = np.abs(np.asarray(s, dtype=float) / w)
        return c * w * (x + np.log1p(np.exp(-2.0 * x)) - math.log(2.0))

    return ReactionTerm(g, dg, d2g, G, -c, c, name=f"tanh(scale={c:g},width={w:g})")


REACTION_REGISTRY: dict[str, Callable[..., ReactionTerm]] = {
    "atan": _atan_family,
    "tanh": _tanh_family,
}


def make_reaction(name: str, scale: float = 1.0, width: float = 1.0) -> ReactionTerm:
    try:
        factory = REACTION_REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown reaction term {name!r}; known: {sorted(REACTION_REGISTRY)}")
    if scale <= 0 or width <= 0:
        raise ValueError("scale and width must be positive")
    return factory(scale, width)


def arctan_reaction() -> ReactionTerm:
    return make_reaction("atan")


def zero_reaction() -> ReactionTerm:
    """g = 0.  Not an admissible reaction term; used for the limit model."""
    zero = lambda s: np.zeros_like(np.asarray(s, dtype=float))  # noqa: E731
    return ReactionTerm(zero, zero, zero, zero, 0.0, 0.0, name="zero")


# ---------------------------------------------------------------------------
# forcing


@dataclass(frozen=True)
class ForcingTerm:
    """Bounded forcing with known asymptotic average.

    ``average_error(T)`` bounds sup_t |window mean over [t, t+T] - A(p)| and
    is non-increasing in T.  ``terms`` holds (omega, a, b) triples for
    trigonometric forcings: p = average + sum a cos(omega t) + b sin(omega t).
    """

    p: Func
    sup_norm: float
    average: float
    average_error: Callable[[float], float]
    period: Optional[float] = None
    terms: tuple = ()
    label: str = "custom"

    @property
    def M1(self) -> float:
        return self.sup_norm + 1.0

    @property
    def is_constant(self) -> bool:
        return self.label.startswith("trig") and all(a == 0 and b == 0 for _, a, b in self.terms)


def trig_forcing(constant: float, terms: Sequence[tuple] = (), period: Optional[float] = None) -> ForcingTerm:
    """p(t) = constant + sum_i a_i cos(w_i t) + b_i sin(w_i t), with w_i != 0."""
    terms = tuple((float(w), float(a), float(b)) for w, a, b in terms)
    if any(w == 0 for w, _, _ in terms):
        raise ValueError("oscillating terms need a nonzero frequency; fold constants into `constant`")
    c = float(constant)
    omegas = np.array([w for w, _, _ in terms])
    acoef = np.array([a for _, a, _ in terms])
    bcoef = np.array([b for _, _, b in terms])
    amps = np.hypot(acoef, bcoef)

    def p(t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, c)
        for w, a, b in terms:
            out = out + a * np.cos(w * t) + b * np.sin(w * t)
        return out

    envelope = float(np.sum(2.0 * amps / np.abs(omegas))) if terms else 0.0

    def average_error(T: float) -> float:
        return envelope / T

    if period is not None:
        period = float(period)
        if period <= 0:
            raise ValueError("period must be positive")
    label = "trig:" + ",".join(f"{w:g}/{a:g}/{b:g}" for w, a, b in terms)
    return ForcingTerm(p, abs(c) + float(amps.sum()), c, average_error, period, terms, label)


def constant_forcing(value: float) -> ForcingTerm:
    return trig_forcing(value, ())


# ---------------------------------------------------------------------------
# (h1) validation


@dataclass
class ClauseResult:
    name: str
    passed: bool
    worst_point: Optional[float] = None
    worst_value: Optional[float] = None


@dataclass
class ValidationReport:
    clauses: list[ClauseResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def failed(self) -> list[str]:
        return [c.name for c in self.clauses if not c.passed]

    def __getitem__(self, name: str) -> ClauseResult:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)


def _worst(name, bad_measure, s):
    """bad_measure > 0 marks a violation; the worst point is its argmax."""
    i = int(np.argmax(bad_measure))
    return ClauseResult(name, bool(bad_measure[i] <= 0), float(s[i]), float(bad_measure[i]))


def validate_h1(g: ReactionTerm, sample_range: float = 50.0, n_samples: int = 1000,
                fd_rtol: float = 1e-5) -> ValidationReport:
    """Sample-based check of the (h1) hypotheses on [-sample_range, sample_range].

    Only certifies the sampled points; global properties are out of reach.
    """
    if sample_range <= 0 or n_samples < 100:
        raise ValueError("need sample_range > 0 and n_samples >= 100")
    s = np.linspace(-sample_range, sample_range, n_samples)
    s = s[s != 0.0]
    vals = {}
    for key in ("g", "dg", "d2g", "G"):
        v = np.asarray(getattr(g, key)(s), dtype=float)
        bad = ~np.isfinite(v)
        if bad.any():
            raise NonFiniteValue(f"{key} is not finite at s={s[np.argmax(bad)]:g}")
        vals[key] = v
    gv, dgv, d2gv, Gv = vals["g"], vals["dg"], vals["d2g"], vals["G"]
    report = ValidationReport()

    bounded = math.isfinite(g.g_minus) and math.isfinite(g.g_plus) and g.g_minus < 0 < g.g_plus
    report.clauses.append(ClauseResult("bounded", bounded, None,
                                       None if bounded else float(max(abs(g.g_minus), abs(g.g_plus)))))
    g0 = float(np.asarray(g.g(np.array([0.0])))[0])
    G0 = float(np.asarray(g.G(np.array([0.0])))[0])
    report.clauses.append(ClauseResult("g(0)=0", abs(g0) <= 1e-14, 0.0, g0))
    report.clauses.append(ClauseResult("G(0)=0", abs(G0) <= 1e-14, 0.0, G0))
    report.clauses.append(_worst("increasing", -dgv, s))
    report.clauses.append(_worst("inflection", np.sign(s) * d2gv, s))
    if bounded:
        report.clauses.append(_worst("range", np.maximum(gv - g.g_plus, g.g_minus - gv), s))
        ratio = Gv / s
        report.clauses.append(_worst("primitive ratio", np.maximum(ratio - g.g_plus, g.g_minus - ratio), s))
    else:
        report.clauses.append(ClauseResult("range", False))
        report.clauses.append(ClauseResult("primitive ratio", False))

    eta = 1e-5 * np.maximum(1.0, np.abs(s))
    fd_dg = (g.g(s + eta) - g.g(s - eta)) / (2 * eta)
    fd_d2g = (g.dg(s + eta) - g.dg(s - eta)) / (2 * eta)
    fd_G = (g.G(s + eta) - g.G(s - eta)) / (2 * eta)

    def consistency(name, fd, exact):
        scale = np.abs(exact) + np.max(np.abs(exact))
        return _worst(name, np.abs(fd - exact) - fd_rtol * scale, s)

    report.clauses.append(consistency("dg consistent", fd_dg, dgv))
    report.clauses.append(consistency("d2g consistent", fd_d2g, d2gv))
    report.clauses.append(consistency("G consistent", fd_G, gv))
    return report


# ---------------------------------------------------------------------------
# averages


def simpson_integral(f: Func, lo: float, hi: float, tol: float = 1e-8, max_level: int = 22) -> float:
    """Composite Simpson rule, doubling the panel count until two levels agree to tol."""
    n = 64
    prev = None
    for _ in range(max_level):
        x = np.linspace(lo, hi, 2 * n + 1)
        y = np.asarray(f(x), dtype=float)
        h = (hi - lo) / (2 * n)
        val = h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())
        if prev is not None and abs(val - prev) <= 15.0 * tol:
            return float(val + (val - prev) / 15.0)
        prev = val
        n *= 2
    return float(val)


def estimate_average(p: ForcingTerm, T: float, t_probes: Sequence[float]) -> tuple[float, float]:
    """Mean of the sliding-window averages over the probes and their max deviation."""
    if T <= 0:
        raise ValueError("window length must be positive")
    probes = list(t_probes)
    if not probes:
        raise ValueError("need at least one probe")
    means = np.array([simpson_integral(p.p, t, t + T, tol=1e-8 * T) / T for t in probes])
    if not np.all(np.isfinite(means)):
        raise NonFiniteValue("forcing evaluation produced non-finite values")
    a_hat = float(means.mean())
    return a_hat, float(np.max(np.abs(means - a_hat)))


class Margin(NamedTuple):
    ok: bool
    lower_margin: float
    upper_margin: float


def landesman_lazer_margin(g: ReactionTerm, p: ForcingTerm) -> Margin:
    lower = p.average - g.g_minus
    upper = g.g_plus - p.average
    return Margin(lower > 0 and upper > 0, lower, upper)


def margin_for_sign(g: ReactionTerm, p: ForcingTerm, sign: int) -> float:
    """Source k of the limit problem for a positive (+1) or negative (-1) piece."""
    m = landesman_lazer_margin(g, p)
    return m.upper_margin if sign > 0 else m.lower_margin


# ---------------------------------------------------------------------------
# bounded-primitive decomposition


@dataclass(frozen=True)
class ForcingDecomposition:
    p1: Func
    p2: Func
    epsilon: float
    p2_sup: float

    @property
    def M_eps(self) -> float:
        return self.p2_sup + 1.0


def decompose_periodic(p: ForcingTerm, epsilon: float = 0.5, n_samples: int = 20001) -> ForcingDecomposition:
    """p = A(p) + d/dt p2 with p2(t) = int_0^t (p - A(p)), periodic hence bounded."""
    if p.period is None:
        raise NotPeriodic("decomposition is only constructed for forcings with a declared period")
    T = p.period
    A = p.average

    def p1(t):
        return np.full(np.shape(t), A, dtype=float)

    if p.label.startswith("trig"):
        terms = p.terms

        def p2(t):
            t = np.asarray(t, dtype=float)
            out = np.zeros(t.shape)
            for w, a, b in terms:
                out = out + a / w * np.sin(w * t) - b / w * (np.cos(w * t) - 1.0)
            return out
    else:
        def _scalar(t):
            tr = math.fmod(t, T)
            if tr < 0:
                tr += T
            val, _ = integrate.quad(lambda s: float(p.p(np.array([s]))[0]) - A, 0.0, tr,
                                    epsabs=1e-13, epsrel=1e-13, limit=200)
            return val

        def p2(t):
            t = np.asarray(t, dtype=float)
            return np.vectorize(_scalar, otypes=[float])(t)

    grid = np.linspace(0.0, T, n_samples)
    sup2 = float(np.max(np.abs(p2(grid))))
    return ForcingDecomposition(p1, p2, float(epsilon), sup2)


def check_periodic(p: ForcingTerm, n_samples: int = 2000, span_periods: int = 5) -> float:
    """max |p(t+T) - p(t)| on samples; raises NotPeriodic without a declared period."""
    if p.period is None:
        raise NotPeriodic("no period declared")
    t = np.linspace(-span_periods * p.period, span_periods * p.period, n_samples)
    return float(np.max(np.abs(p.p(t + p.period) - p.p(t))))
