"""Run configuration: sectioned ``key = value`` files parsed with configparser.

Example::

    [problem]
    g = atan            ; registry name, optional g_scale / g_width

    [forcing]
    constant = 0.3
    terms = cos 1 0.5   ; "cos|sin omega amplitude", separated by ';'
    period = 6.283185307179586

    [solver]
    h = 0.05
    tol = 1e-9

    [solve]
    A = 0
    B = 160
    k = 3
    start_sign = +
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

from .problem import REACTION_REGISTRY, ForcingTerm, ReactionTerm, make_reaction, trig_forcing
from .signed import SolverOptions


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (exit code 1)."""


@dataclass(frozen=True)
class ProblemSpec:
    g: str = "atan"
    g_scale: float = 1.0
    g_width: float = 1.0
    constant: float = 0.0
    terms: tuple = ()                 # (omega, a_cos, b_sin)
    period: Optional[float] = None

    def reaction(self) -> ReactionTerm:
        return make_reaction(self.g, self.g_scale, self.g_width)

    def forcing(self) -> ForcingTerm:
        return trig_forcing(self.constant, self.terms, self.period)


@dataclass(frozen=True)
class SolveSpec:
    A: float = 0.0
    B: float = 80.0
    k: int = 1
    start_sign: int = 1


@dataclass(frozen=True)
class SubharmonicSpec:
    n: int = 20
    k: int = 1


@dataclass(frozen=True)
class SweepSpec:
    mu: float = 30.0
    n_values: tuple = (2, 3)
    window: float = 20.0


@dataclass(frozen=True)
class VerifySpec:
    a: float = 0.0
    b: float = 40.0
    delta: float = 0.01
    brute_B: float = 80.0
    brute_step: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    solver: SolverOptions = field(default_factory=SolverOptions)
    bracket_eps: Optional[float] = None
    solve: SolveSpec = field(default_factory=SolveSpec)
    subharmonic: SubharmonicSpec = field(default_factory=SubharmonicSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    verify: VerifySpec = field(default_factory=VerifySpec)
    out: str = "out"
    seed: int = 0

    def canonical(self) -> dict:
        """Everything that can change the numbers (worker count and paths excluded)."""
        d = dataclasses.asdict(self)
        d.pop("out")
        d["solver"].pop("workers")
        return d

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, default=list)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


_SECTIONS = {"problem", "forcing", "solver", "solve", "subharmonic", "sweep", "verify", "output"}
_SOLVER_KEYS = {"h": "h_target", "tol": "tol", "max_iter": "max_iter", "min_length": "min_length",
                "n_starts": "n_starts", "outer_tol": "outer_tol", "max_outer_iter": "max_outer_iter",
                "mismatch_tol": "mismatch_tol", "workers": "workers"}


def _num(section, key, raw, kind=float):
    try:
        val = kind(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r}: expected {kind.__name__}") from None
    if kind is float and not math.isfinite(val):
        raise ConfigError(f"[{section}] {key} must be finite")
    return val


def _sign_value(section, key, raw):
    table = {"+": 1, "+1": 1, "1": 1, "-": -1, "-1": -1}
    if raw.strip() not in table:
        raise ConfigError(f"[{section}] {key} = {raw!r}: expected + or -")
    return table[raw.strip()]


def parse_terms(raw: str) -> tuple:
    """'cos 1 0.5; sin 2 0.1' -> ((1, 0.5, 0), (2, 0, 0.1))."""
    out = []
    for chunk in filter(None, (c.strip() for c in raw.split(";"))):
        parts = chunk.split()
        if len(parts) != 3 or parts[0] not in ("cos", "sin"):
            raise ConfigError(f"[forcing] terms: cannot parse {chunk!r} (want 'cos|sin omega amplitude')")
        w = _num("forcing", "terms", parts[1])
        amp = _num("forcing", "terms", parts[2])
        if w == 0:
            raise ConfigError("[forcing] terms: frequency must be nonzero")
        out.append((w, amp, 0.0) if parts[0] == "cos" else (w, 0.0, amp))
    return tuple(out)


def _take(sec, name, allowed):
    unknown = set(sec) - set(allowed)
    if unknown:
        raise ConfigError(f"[{name}] unknown keys: {', '.join(sorted(unknown))}")
    return sec


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from None
    unknown = set(cp.sections()) - _SECTIONS
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")

    def sec(name):
        return dict(cp[name]) if cp.has_section(name) else {}

    pr = _take(sec("problem"), "problem", {"g", "g_scale", "g_width"})
    fo = _take(sec("forcing"), "forcing", {"constant", "terms", "period"})
    g_name = pr.get("g", "atan").strip()
    if g_name not in REACTION_REGISTRY:
        raise ConfigError(f"[problem] g = {g_name!r} not in registry ({', '.join(sorted(REACTION_REGISTRY))})")
    period = fo.get("period", "").strip()
    problem = ProblemSpec(
        g=g_name,
        g_scale=_num("problem", "g_scale", pr.get("g_scale", "1")),
        g_width=_num("problem", "g_width", pr.get("g_width", "1")),
        constant=_num("forcing", "constant", fo.get("constant", "0")),
        terms=parse_terms(fo.get("terms", "")),
        period=_num("forcing", "period", period) if period else None)
    if problem.period is not None and problem.period <= 0:
        raise ConfigError("[forcing] period must be positive")

    so = _take(sec("solver"), "solver", set(_SOLVER_KEYS) | {"bracket_eps"})
    kw = {}
    for key, attr in _SOLVER_KEYS.items():
        if key in so:
            kind = int if attr in ("max_iter", "n_starts", "max_outer_iter", "workers") else float
            kw[attr] = _num("solver", key, so[key], kind)
    kw.setdefault("workers", os.cpu_count() or 1)
    bracket_eps = _num("solver", "bracket_eps", so["bracket_eps"]) if "bracket_eps" in so else None

    sv = _take(sec("solve"), "solve", {"A", "B", "k", "start_sign"})
    solve = SolveSpec(A=_num("solve", "A", sv.get("A", "0")), B=_num("solve", "B", sv.get("B", "80")),
                      k=_num("solve", "k", sv.get("k", "1"), int),
                      start_sign=_sign_value("solve", "start_sign", sv.get("start_sign", "+")))
    if solve.B <= solve.A:
        raise ConfigError("[solve] need A < B")
    if solve.k < 0:
        raise ConfigError("[solve] k must be nonnegative")

    sh = _take(sec("subharmonic"), "subharmonic", {"n", "k"})
    sub = SubharmonicSpec(n=_num("subharmonic", "n", sh.get("n", "20"), int),
                          k=_num("subharmonic", "k", sh.get("k", "1"), int))
    if sub.n < 1 or sub.k < 1 or sub.k % 2 == 0:
        raise ConfigError("[subharmonic] need n >= 1 and k odd")

    sw = _take(sec("sweep"), "sweep", {"mu", "n_values", "window"})
    try:
        n_values = tuple(int(x) for x in sw.get("n_values", "2, 3").replace(",", " ").split())
    except ValueError:
        raise ConfigError("[sweep] n_values must be integers") from None
    sweep = SweepSpec(mu=_num("sweep", "mu", sw.get("mu", "30")), n_values=n_values,
                      window=_num("sweep", "window", sw.get("window", "20")))
    if not n_values or any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise ConfigError("[sweep] n_values must be a non-empty increasing list")

    ve = _take(sec("verify"), "verify", {"a", "b", "delta", "brute_B", "brute_step"})
    verify = VerifySpec(**{k: _num("verify", k, v) for k, v in ve.items()})

    ou = _take(sec("output"), "output", {"dir", "seed"})
    return RunConfig(problem=problem, solver=SolverOptions(**kw), bracket_eps=bracket_eps, solve=solve,
                     subharmonic=sub, sweep=sweep, verify=verify, out=ou.get("dir", "out"),
                     seed=_num("output", "seed", ou.get("seed", "0"), int))


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def apply_overrides(cfg: RunConfig, *, out=None, seed=None, workers=None, h=None, tol=None) -> RunConfig:
    solver = cfg.solver
    if h is not None:
        if not h > 0:
            raise ConfigError("--h must be positive")
        solver = dataclasses.replace(solver, h_target=h)
    if tol is not None:
        if not tol > 0:
            raise ConfigError("--tol must be positive")
        solver = dataclasses.replace(solver, tol=tol)
    if workers is not None:
        if workers < 1:
            raise ConfigError("--workers must be at least 1")
        solver = dataclasses.replace(solver, workers=workers)
    seed = cfg.seed if seed is None else seed
    solver = dataclasses.replace(solver, seed=seed)
    return dataclasses.replace(cfg, solver=solver, seed=seed, out=out if out is not None else cfg.out)
