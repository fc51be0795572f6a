"""Maximization of psi(t_1..t_k) = sum_i phi^{sigma(i)}(t_i, t_{i+1}) over partitions.

Admissible partitions of (A, B) keep every gap t_{i+1} - t_i >= L (with
t_0 = A, t_{k+1} = B).  In shifted variables s_i = t_i - i L this is an
order simplex, so the Euclidean projection is an isotonic regression
(pool-adjacent-violators) followed by clipping.
"""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import isotonic_regression

from .errors import BoundaryStuck, DualNehariError, NonConvergence
from .functional import nodes_for
from .problem import ForcingTerm, ReactionTerm, margin_for_sign
from .signed import SignedMinimizerResult, SolverOptions, _sign, certify_spacing_floor, minimize_signed


def pool_adjacent_violators(y, w=None) -> np.ndarray:
    """Weighted least-squares nondecreasing fit to y."""
    return isotonic_regression(np.asarray(y, dtype=float), weights=w, increasing=True).x


def project_spacing(t, A: float, B: float, L: float) -> np.ndarray:
    """Euclidean projection of t onto {A + L <= t_1, t_{i+1} - t_i >= L, t_k <= B - L}."""
    t = np.asarray(t, dtype=float)
    k = t.size
    if k == 0:
        return t.copy()
    shift = L * np.arange(1, k + 1)
    s = pool_adjacent_violators(t - shift)
    s = np.clip(s, A, B - (k + 1) * L)
    return s + shift


@dataclass(frozen=True)
class Partition:
    A: float
    B: float
    points: tuple
    L: float
    start_sign: int = 1

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(float(x) for x in self.points))
        object.__setattr__(self, "start_sign", _sign(self.start_sign))

    @property
    def k(self) -> int:
        return len(self.points)

    @property
    def edges(self) -> np.ndarray:
        return np.array((self.A, *self.points, self.B))

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.edges)

    def signs(self) -> list[int]:
        return [self.start_sign * (1 if i % 2 == 0 else -1) for i in range(self.k + 1)]

    def is_admissible(self, rtol: float = 1e-12) -> bool:
        return bool(np.all(self.lengths >= self.L * (1 - rtol)))


class RatioStats(NamedTuple):
    lambda_min_len: float
    lambda_max_len: float
    max_adjacent_ratio: float


def ratio_stats(lengths) -> RatioStats:
    lengths = np.asarray(lengths, dtype=float)
    if lengths.size > 1:
        adj = np.maximum(lengths[1:] / lengths[:-1], lengths[:-1] / lengths[1:])
        max_adj = float(adj.max())
    else:
        max_adj = 1.0
    return RatioStats(float(lengths.min()), float(lengths.max()), max_adj)


@dataclass
class PartitionResult:
    partition: Partition
    psi: float
    gradient: np.ndarray
    grad_norm: float
    minimizers: list
    corner_mismatches: np.ndarray
    interior: bool
    ratio_stats: RatioStats
    iterations: int = 0
    converged: bool = False
    node_counts: tuple = ()
    trace: list = field(default_factory=list)
    multiplicity: int = 1

    @property
    def max_corner_mismatch(self) -> float:
        return float(np.max(self.corner_mismatches)) if self.corner_mismatches.size else 0.0

    @property
    def slope_scale(self) -> float:
        return max(max(abs(m.slope_a), abs(m.slope_b)) for m in self.minimizers)

    def write_trace(self, path) -> None:
        write_trace(self.trace, path)


def write_trace(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        k = len(trace[0][3]) if trace else 0
        w.writerow(["iteration", "psi", "grad_norm"] + [f"t{i + 1}" for i in range(k)])
        for it, psi, gn, pts in trace:
            w.writerow([it, repr(float(psi)), repr(float(gn))] + [repr(float(x)) for x in pts])


def _solve_pieces(edges, signs, g, p, opts, node_counts=None, warm=None):
    """Signed minimizers on consecutive sub-intervals; errors carry the piece index."""
    edges = np.asarray(edges, dtype=float)

    def one(i):
        a, b = edges[i], edges[i + 1]
        n = node_counts[i] if node_counts is not None else None
        u0 = warm[i].u if warm is not None and warm[i] is not None else None
        try:
            return minimize_signed(a, b, signs[i], g, p, opts, n=n, u0=u0)
        except DualNehariError as exc:
            exc.subinterval = i
            exc.args = (f"sub-interval {i} ({a:g}, {b:g}): {exc.args[0] if exc.args else exc}",)
            raise

    idx = range(len(edges) - 1)
    if opts.workers > 1 and len(edges) > 2:
        with ThreadPoolExecutor(max_workers=opts.workers) as pool:
            return list(pool.map(one, idx))
    return [one(i) for i in idx]


def psi_value(P: Partition, g: ReactionTerm, p: ForcingTerm, opts: SolverOptions = SolverOptions(),
              node_counts=None, warm=None):
    """psi and the k+1 sub-interval minimizers."""
    if not P.is_admissible():
        raise ValueError("partition violates the spacing floor")
    sub_opts = opts if opts.min_length == P.L else _with_floor(opts, P.L)
    mins = _solve_pieces(P.edges, P.signs(), g, p, sub_opts, node_counts, warm)
    return math.fsum(m.phi for m in mins), mins


def _with_floor(opts: SolverOptions, L: float) -> SolverOptions:
    import dataclasses
    return dataclasses.replace(opts, min_length=L)


def corner_gradient(mins: Sequence[SignedMinimizerResult]) -> np.ndarray:
    """d psi / d t_i = -u_{i-1}'(t_i-)^2/2 + u_i'(t_i+)^2/2."""
    return np.array([-0.5 * mins[i - 1].slope_b ** 2 + 0.5 * mins[i].slope_a ** 2
                     for i in range(1, len(mins))])


def psi_gradient(P: Partition, minimizers: Sequence[SignedMinimizerResult]) -> np.ndarray:
    if len(minimizers) != P.k + 1:
        raise ValueError("need one minimizer per sub-interval")
    return corner_gradient(minimizers)


def initial_lengths(total: float, signs: Sequence[int], g: ReactionTerm, p: ForcingTerm) -> np.ndarray:
    """Lengths proportional to 1/k_sign: equalises the limit-model corner speeds k*len/2."""
    w = np.array([1.0 / margin_for_sign(g, p, s) for s in signs])
    return total * w / w.sum()


# ---------------------------------------------------------------------------
# projected gradient ascent with Barzilai-Borwein steps


@dataclass
class AscentState:
    x: np.ndarray
    psi: float
    grad: np.ndarray
    mins: list


def projected_ascent(x0: np.ndarray, evaluate: Callable, project: Callable, opts: SolverOptions,
                     trace_points: Callable = lambda x: x):
    """Maximise via evaluate(x, warm) -> (psi, grad, mins) over the set defined by project.

    Returns (state, iterations, converged, trace).
    """
    x = project(np.asarray(x0, dtype=float))
    psi, grad, mins = evaluate(x, None)
    trace = []
    alpha = None
    converged = False
    it = 0

    def pgrad(x, grad):
        gmax = float(np.max(np.abs(grad))) if grad.size else 0.0
        if gmax == 0.0:
            return grad
        tau = 1e-6 / gmax
        return (project(x + tau * grad) - x) / tau

    for it in range(opts.max_outer_iter + 1):
        pg = pgrad(x, grad)
        gnorm = float(np.max(np.abs(pg))) if pg.size else 0.0
        trace.append((it, psi, gnorm, tuple(trace_points(x))))
        if gnorm <= opts.outer_tol * (1.0 + abs(psi)):
            converged = True
            break
        if it == opts.max_outer_iter:
            break
        if alpha is None:
            alpha = 1.0 / max(gnorm, 1e-300)
        step = alpha
        accepted = False
        for _ in range(40):
            x_new = project(x + step * grad)
            dx = x_new - x
            if not np.any(dx):
                break
            psi_new, grad_new, mins_new = evaluate(x_new, mins)
            slack = 64 * np.finfo(float).eps * (abs(psi) + 1.0)
            if psi_new >= psi + 1e-4 * float(np.dot(grad, dx)) - slack and psi_new >= psi - slack:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        dg = grad_new - grad
        sy = float(np.dot(dx, dg))
        alpha = float(np.dot(dx, dx)) / -sy if sy < 0 else 2.0 * step
        x, psi, grad, mins = x_new, psi_new, grad_new, mins_new
    return AscentState(x, psi, grad, mins), it, converged, trace


def _max_gap_violation(lengths, L):
    return bool(np.any(lengths <= L * (1 + 1e-9)))


def maximize_partition(A: float, B: float, k: int, start_sign, g: ReactionTerm, p: ForcingTerm,
                       opts: SolverOptions = SolverOptions(), L: Optional[float] = None,
                       H: Optional[float] = None, init=None, restarts: int = 0) -> PartitionResult:
    """Stationary (maximizing) partition of (A, B) into k+1 alternating pieces."""
    s0 = _sign(start_sign)
    if L is None:
        L = opts.min_length if opts.min_length is not None else certify_spacing_floor(g, p, opts=opts).L
    if B - A < (k + 1) * L:
        raise BoundaryStuck(f"B - A = {B - A:g} < (k+1) L = {(k + 1) * L:g}: no admissible partition; "
                            "enlarge the interval (B - A >= H(k+1) is required for an interior maximizer)")
    if H is not None and B - A < H * (k + 1):
        warnings.warn(f"B - A = {B - A:g} below the heuristic threshold H(k+1) = {H * (k + 1):g}", stacklevel=2)
    sub_opts = _with_floor(opts, L)
    signs = [s0 * (1 if i % 2 == 0 else -1) for i in range(k + 1)]
    if init is None:
        lengths = initial_lengths(B - A, signs, g, p)
        init = A + np.cumsum(lengths)[:-1]

    def project(t):
        return project_spacing(t, A, B, L)

    best = _run_ascent(np.asarray(init, dtype=float), A, B, L, signs, project, g, p, sub_opts)
    if restarts:
        rng = np.random.default_rng(opts.seed)
        for _ in range(restarts):
            cand = _run_ascent(random_partition(A, B, k, L, rng), A, B, L, signs, project, g, p, sub_opts)
            same_value = abs(cand.psi - best.psi) <= 1e-8 * (1 + abs(best.psi))
            distinct = np.max(np.abs(np.array(cand.partition.points) - best.partition.points)) > 1e-3
            if same_value and distinct:
                best.multiplicity += 1
            elif cand.psi > best.psi and not same_value:
                cand.multiplicity = best.multiplicity
                best = cand
    if not best.interior:
        raise BoundaryStuck(f"maximizing partition touches the spacing floor L = {L:g} "
                            f"(lengths {np.round(best.partition.lengths, 4).tolist()}); "
                            "B - A is too small relative to H(k+1)")
    if not best.converged:
        raise NonConvergence(f"partition ascent stopped with grad_norm {best.grad_norm:.3e} "
                             f"after {best.iterations} iterations")
    return best


def _run_ascent(t0, A, B, L, signs, project, g, p, opts) -> PartitionResult:
    k = len(signs) - 1
    t = project(t0)
    node_counts = None
    total_it = 0
    trace = []
    # second pass re-derives node counts from the converged lengths
    for _ in range(2):
        edges = np.concatenate(([A], t, [B]))
        node_counts = tuple(nodes_for(edges[i], edges[i + 1], opts.h_target) for i in range(k + 1))

        def evaluate(x, warm, node_counts=node_counts):
            e = np.concatenate(([A], x, [B]))
            mins = _solve_pieces(e, signs, g, p, opts, node_counts, warm)
            return math.fsum(m.phi for m in mins), corner_gradient(mins), mins

        state, its, converged, tr = projected_ascent(t, evaluate, project, opts)
        trace += [(total_it + i, *rest) for i, *rest in tr]
        total_it += its
        t = state.x
    P = Partition(A, B, tuple(state.x), L, signs[0])
    lengths = P.lengths
    grad = state.grad
    gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
    return PartitionResult(
        partition=P, psi=state.psi, gradient=grad, grad_norm=gnorm, minimizers=state.mins,
        corner_mismatches=np.abs(grad), interior=not _max_gap_violation(lengths, L),
        ratio_stats=ratio_stats(lengths), iterations=total_it, converged=converged,
        node_counts=node_counts, trace=trace)


def random_partition(A: float, B: float, k: int, L: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample from the admissible set (slack split by a flat Dirichlet draw)."""
    slack = (B - A) - (k + 1) * L
    gaps = L + slack * rng.dirichlet(np.ones(k + 1))
    return A + np.cumsum(gaps)[:-1]


def maximality_probe(result: PartitionResult, g: ReactionTerm, p: ForcingTerm,
                     opts: SolverOptions = SolverOptions(), n_probes: int = 50, seed: int = 0):
    """psi at random admissible partitions; returns (all_lower, best_probe_psi, probe_values)."""
    P = result.partition
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(n_probes):
        t = random_partition(P.A, P.B, P.k, P.L, rng)
        psi, _ = psi_value(Partition(P.A, P.B, tuple(t), P.L, P.start_sign), g, p, opts)
        values.append(psi)
    values = np.array(values)
    return bool(np.all(values <= result.psi)), float(values.max()), values


def ratio_diagnostics(results: Sequence[PartitionResult]) -> dict:
    """Length-ratio statistics over a batch of converged partitions.

    h_bar is the largest adjacent length ratio seen, h_star the largest
    global ratio lambda_max / lambda_min.
    """
    rows = []
    for r in results:
        st = r.ratio_stats
        P = r.partition
        rows.append({"k": P.k, "span": P.B - P.A, "lambda_min": st.lambda_min_len,
                     "lambda_max": st.lambda_max_len, "global_ratio": st.lambda_max_len / st.lambda_min_len,
                     "max_adjacent_ratio": st.max_adjacent_ratio,
                     "pigeonhole_ok": st.lambda_min_len <= (P.B - P.A) / (P.k + 1) <= st.lambda_max_len})
    adj = np.array([r["max_adjacent_ratio"] for r in rows])
    glob = np.array([r["global_ratio"] for r in rows])
    return {"runs": rows, "h_bar": float(adj.max()), "h_star": float(glob.max()),
            "adjacent_ratio_variation": float((adj.max() - adj.min()) / adj.min()),
            "global_ratio_bounded": bool(np.all(np.isfinite(glob)))}


def estimate_H(L: float, h_star: float) -> float:
    """Threshold H = h*(L + 1) on (B - A)/(k + 1) for interior maximizers."""
    return h_star * (L + 1.0)
