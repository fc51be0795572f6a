"""Acceptance criteria, one test and one PASS/FAIL line per criterion.

Tolerances and runtime limits are fixed by the project contract and are not
tuned to the implementation; a criterion that the discretization cannot meet
fails here and is analysed in the project notes.
"""
import math
import time

import numpy as np
import pytest

from dualnehari.assembly import (assemble, exhaustion_sweep, minimal_period_certificate, necessity_check,
                                 solve_subharmonic)
from dualnehari.functional import GridFunction, nodes_for
from dualnehari.oracle import brute_force_partition, fd_phi_derivative, shoot_bvp, shooting_gap
from dualnehari.partition import maximize_partition
from dualnehari.problem import arctan_reaction, constant_forcing, trig_forcing, zero_reaction
from dualnehari.signed import (SolverOptions, certify_spacing_floor, make_bracket, minimize_signed,
                               nondegeneracy_eigenvalue, phi_derivatives, uniqueness_probe)

G = arctan_reaction()
P0 = constant_forcing(0.0)
P03 = constant_forcing(0.3)
PCOS = trig_forcing(0.3, [(1.0, 0.5, 0.0)], period=2 * math.pi)
T = 2 * math.pi


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


@pytest.fixture(scope="module")
def floor():
    return certify_spacing_floor(G, PCOS).L


@pytest.fixture(scope="module")
def opts(floor):
    return SolverOptions(min_length=floor)


@pytest.fixture(scope="module")
def gluing_run(opts):
    with Clock() as c:
        res = maximize_partition(0, 160, 3, +1, G, PCOS, opts)
    return res, assemble(res, G, PCOS), c.seconds


@pytest.fixture(scope="module")
def subharmonic_runs(opts):
    with Clock() as c:
        runs = {nk: solve_subharmonic(T, nk[0], nk[1], G, PCOS, opts) for nk in [(20, 1), (30, 3), (21, 1)]}
    return runs, c.seconds


@pytest.fixture(scope="module")
def sweep_run(opts):
    with Clock() as c:
        sols, rep = exhaustion_sweep(5 * T, [2, 3, 4], G, PCOS, opts, window=20.0)
    return sols, rep, c.seconds


def test_criterion_1_limit_problem(acceptance):
    with Clock() as c:
        r = minimize_signed(0.0, 1.0, +1, zero_reaction(), constant_forcing(-1.0), n=999,
                            compute_eigenvalue=False)
    t = r.u.nodes
    dist = float(np.max(np.abs(r.u.values - 0.5 * t * (1 - t))))
    err = abs(r.phi + 1 / 24)
    ok = dist <= 1e-6 and err <= 1e-8 and c.seconds < 1
    acceptance(1, ok, f"profile sup-distance {dist:.2e} (tol 1e-6), |value + 1/24| = {err:.3e} (tol 1e-8; "
                      f"linear elements predict h^2/24 = {r.u.h ** 2 / 24:.3e}), {c.seconds:.2f} s")
    assert ok


def test_criterion_2_energy_bracket(acceptance):
    bad, trends = [], []
    with Clock() as c:
        for name, p in [("0", P0), ("0.3", P03), ("0.3+0.5cos t", PCOS)]:
            lo, hi = make_bracket(G, p, 0.01).bounds(+1)
            limit = -(G.g_plus - p.average) ** 2 / 24
            ratios = []
            for length in (20, 40, 80):
                ratio = minimize_signed(0, length, +1, G, p).phi / length ** 3
                ratios.append(ratio)
                if not lo <= ratio <= hi:
                    bad.append(f"p={name} len={length}: {ratio:.5f} not in [{lo:.5f}, {hi:.5f}]")
            gaps = [abs(x - limit) for x in ratios]
            trends.append(all(b < a for a, b in zip(gaps, gaps[1:])))
    ok = not bad and all(trends) and c.seconds < 30
    acceptance(2, ok, f"{9 - len(bad)}/9 ratios inside the bracket, monotone approach {all(trends)}, "
                      f"{c.seconds:.2f} s" + ("; " + "; ".join(bad) if bad else ""))
    assert ok


def test_criterion_3_derivative_formula(acceptance):
    cases = [((0, 40), P0, +1), ((0, 40), P03, +1), ((0, 40), P03, -1),
             ((5, 35), PCOS, +1), ((-20, 60), PCOS, -1), ((10, 70), PCOS, +1)]
    worst = 0.0
    with Clock() as c:
        for (a, b), p, s in cases:
            r = minimize_signed(a, b, s, G, p)
            exact = np.array(phi_derivatives(r))
            fd = np.array(fd_phi_derivative(a, b, s, G, p, delta=0.01, n=r.u.n))
            worst = max(worst, float(np.max(np.abs(exact - fd) / np.abs(fd))))
    ok = worst <= 1e-3 and c.seconds < 60
    acceptance(3, ok, f"6 pairs, worst relative gap {worst:.2e} (tol 1e-3), {c.seconds:.2f} s")
    assert ok


def test_criterion_4_uniqueness_nondegeneracy(acceptance):
    configs = [(P0, +1), (P03, +1), (P03, -1), (PCOS, +1)]
    dists, lams = [], []
    with Clock() as c:
        for p, s in configs:
            d, results = uniqueness_probe(0, 40, s, G, p, n_starts=10, seed=0)
            dists.append(d)
            lams += [r.lambda_min for r in results]
        control = nondegeneracy_eigenvalue(GridFunction(0, 10, np.zeros(nodes_for(0, 10, 0.05))), G)
    ok = max(dists) <= 1e-6 and min(lams) > 0 and control < 0 and c.seconds < 120
    acceptance(4, ok, f"max pairwise distance {max(dists):.2e} (tol 1e-6), min lambda_min {min(lams):.3e} > 0, "
                      f"control lambda_min {control:.4f} < 0, {c.seconds:.2f} s")
    assert ok


def test_criterion_5_oracle_equivalence(acceptance):
    with Clock() as c:
        shot = shoot_bvp(0, 40, +1, G, P0)
        coarse = shooting_gap(0, 40, +1, G, P0, 0.05, shot=shot)
        fine = shooting_gap(0, 40, +1, G, P0, 0.0125, shot=shot)
    ok = coarse <= 1e-3 and coarse / fine >= 3 and c.seconds < 60
    acceptance(5, ok, f"gap {coarse:.2e} at h=0.05 (tol 1e-3), {fine:.2e} at h=0.0125, "
                      f"ratio {coarse / fine:.1f} (need >= 3), {c.seconds:.2f} s")
    assert ok


def test_criterion_6_gluing(acceptance, gluing_run, opts):
    res, _, seconds = gluing_run
    stationary = res.grad_norm <= 1e-6 * (1 + abs(res.psi))
    scale = 1 + res.slope_scale ** 2
    glued = res.max_corner_mismatch <= 1e-4 * scale
    with Clock() as c:
        bf1 = brute_force_partition(0, 90, 1, 0.5, G, P03, opts)
        mp1 = maximize_partition(0, 90, 1, +1, G, P03, opts)
        bf2 = brute_force_partition(0, 120, 2, 2.0, G, P03, opts)
        mp2 = maximize_partition(0, 120, 2, +1, G, P03, opts)
    d1 = float(np.max(np.abs(np.subtract(bf1.partition.points, mp1.partition.points))))
    d2 = float(np.max(np.abs(np.subtract(bf2.partition.points, mp2.partition.points))))
    total = seconds + c.seconds
    ok = stationary and glued and d1 <= 0.5 and d2 <= 2.0 and total < 300
    acceptance(6, ok, f"grad_norm {res.grad_norm:.2e} (tol {1e-6 * (1 + abs(res.psi)):.2e}), max corner mismatch "
                      f"{res.max_corner_mismatch:.2e} (tol {1e-4 * scale:.2e}), brute force offsets "
                      f"{d1:.3f} (step 0.5) and {d2:.3f} (step 2), {total:.2f} s")
    assert ok


def _scaled_bounds_ok(m, C):
    L = m.length
    full = m.u.full_values()
    sup = float(np.max(np.abs(full))) / L ** 2
    slope = max(float(np.max(np.abs(np.diff(full)))) / m.u.h, abs(m.slope_a), abs(m.slope_b)) / L
    return sup <= C and slope <= C


def test_criterion_7_bounds(acceptance, gluing_run, subharmonic_runs, sweep_run):
    res, sol, _ = gluing_run
    runs, _ = subharmonic_runs
    sweep_sols, _, _ = sweep_run
    C = G.sup_norm + PCOS.sup_norm
    minimizers = list(res.minimizers) + [m for s in runs.values() for m in s.partition.minimizers]
    glued = [sol] + [s.glued for s in runs.values()] + list(sweep_sols)
    bad_min = sum(not _scaled_bounds_ok(m, C) for m in minimizers)
    bad_upper = sum(not s.bounds["upper_ok"] for s in glued)
    bad_lower = sum(not s.bounds["lower_printed_ok"] for s in glued)
    squared = sum(s.bounds["lower_squared_ok"] for s in glued)
    ok = bad_min == 0 and bad_upper == 0 and bad_lower == 0
    acceptance(7, ok, f"{len(minimizers)} minimizers, {bad_min} scaled-bound violations; {len(glued)} glued "
                      f"solutions, {bad_upper} upper and {bad_lower} lower sandwich violations "
                      f"(squared lower form holds on {squared}/{len(glued)})")
    assert ok


def test_criterion_8_subharmonics(acceptance, subharmonic_runs):
    runs, seconds = subharmonic_runs
    parts, ok = [], seconds < 300
    for (n, k), sol in runs.items():
        gap = max(sol.closure_residuals)
        zeros = sol.zero_count()
        cert = minimal_period_certificate(sol)
        this = gap <= 1e-4 and zeros == k and (cert["passed"] or not cert["coprime"])
        ok &= this
        parts.append(f"(n,k)=({n},{k}) closure {gap:.1e}, zeros {zeros}"
                     + (f", minimal-period certificate {cert['passed']}" if cert["coprime"] else ""))
    acceptance(8, ok, "; ".join(parts) + f"; {seconds:.2f} s")
    assert ok


def test_criterion_9_exhaustion(acceptance, sweep_run):
    _, rep, seconds = sweep_run
    c1 = [d["c1"] for d in rep["differences"]]
    finite = len(c1) == 2 and all(math.isfinite(x) for x in c1)
    ok = finite and c1[1] <= c1[0] and not rep["errors"] and seconds < 600
    parity = ", ".join(f"{d['n']}->{d['n_next']}: {d['c1']:.4g}" for d in rep["parity_differences"])
    acceptance(9, ok, f"mu = 5T, C1 differences 2->3: {c1[0]:.4g}, 3->4: {c1[1]:.4g} "
                      f"(same parity {parity}), {seconds:.2f} s")
    assert ok


def test_criterion_10_necessity(acceptance, gluing_run, subharmonic_runs, sweep_run):
    _, sol, _ = gluing_run
    runs, _ = subharmonic_runs
    sweep_sols, _, _ = sweep_run
    worst, inside, count = 0.0, True, 0
    for s in [sol] + [r.glued for r in runs.values()] + list(sweep_sols):
        span = s.B - s.A
        rep = necessity_check(s, G, PCOS, [w for w in (10.0, 20.0, 40.0) if w < span] + [span])
        count += 1
        worst = max(worst, max(w["identity_error"] for w in rep["windows"]))
        inside &= all(w["strictly_inside"] for w in rep["windows"])
    ok = worst <= 1e-6 and inside
    acceptance(10, ok, f"{count} glued solutions, worst integrated-identity error {worst:.2e} (tol 1e-6), "
                       f"window means of g(u) strictly inside (g-, g+): {inside}")
    assert ok
