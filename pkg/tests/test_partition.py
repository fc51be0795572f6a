import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualnehari.errors import BoundaryStuck
from dualnehari.functional import nodes_for
from dualnehari.partition import (Partition, maximality_probe, maximize_partition, pool_adjacent_violators,
                                  project_spacing, projected_ascent, psi_gradient, psi_value, random_partition,
                                  ratio_diagnostics, ratio_stats)
from dualnehari.signed import SolverOptions, certify_spacing_floor, make_bracket, minimize_signed

SYM = SolverOptions(min_length=10)


@pytest.fixture(scope="module")
def floor03(g, p03):
    return certify_spacing_floor(g, p03).L


@pytest.fixture(scope="module")
def opts03(floor03):
    return SolverOptions(min_length=floor03)


@pytest.fixture(scope="module")
def two_points(g, p03, opts03):
    return maximize_partition(0, 120, 2, +1, g, p03, opts03)


class TestProjection:
    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=30))
    def test_pav_is_monotone_and_mean_preserving(self, y):
        x = pool_adjacent_violators(y)
        assert np.all(np.diff(x) >= -1e-12)
        assert x.sum() == pytest.approx(sum(y), abs=1e-8 * (1 + sum(abs(v) for v in y)))

    @given(pts=st.lists(st.floats(-50, 250), min_size=1, max_size=6), seed=st.integers(0, 2 ** 31))
    def test_spacing_projection_is_euclidean(self, pts, seed):
        A, B, L = 0.0, 200.0, 15.0
        t = np.sort(np.array(pts))[::-1] if seed % 2 else np.array(pts)
        P = project_spacing(t, A, B, L)
        edges = np.concatenate(([A], P, [B]))
        assert np.all(np.diff(edges) >= L - 1e-9)
        np.testing.assert_allclose(project_spacing(P, A, B, L), P, atol=1e-9)
        # variational inequality of the projection onto a convex set
        rng = np.random.default_rng(seed)
        for _ in range(20):
            y = random_partition(A, B, len(pts), L, rng)
            assert float(np.dot(t - P, y - P)) <= 1e-7 * (1 + float(np.dot(t - P, t - P)))


class TestPsi:
    def test_no_points(self, g, p03):
        psi, mins = psi_value(Partition(0, 40, (), 10), g, p03)
        assert len(mins) == 1
        assert psi == minimize_signed(0, 40, +1, g, p03).phi

    def test_symmetric_two_pieces(self, g, p0):
        psi, mins = psi_value(Partition(0, 80, (40,), 10), g, p0)
        assert [m.sign for m in mins] == [1, -1]
        assert psi == pytest.approx(2 * minimize_signed(0, 40, +1, g, p0).phi, rel=1e-12)
        assert psi_gradient(Partition(0, 80, (40,), 10), mins) == pytest.approx([0.0], abs=1e-8)

    def test_four_pieces_independent(self, g, p0):
        P = Partition(0, 160, (40, 80, 120), 10)
        psi, mins = psi_value(P, g, p0)
        assert psi == pytest.approx(4 * minimize_signed(0, 40, +1, g, p0).phi, rel=1e-8)
        assert [m.sign for m in mins] == [1, -1, 1, -1]

    def test_restoring_gradient(self, g, p0):
        P = Partition(0, 80, (41,), 10)
        _, mins = psi_value(P, g, p0)
        assert psi_gradient(P, mins)[0] < 0

    def test_gradient_matches_central_difference(self, g, p03, opts03, floor03):
        A, B = 0.0, 150.0
        t = np.array([50.0, 100.0])
        delta = 0.01
        edges = np.concatenate(([A], t, [B]))
        counts = tuple(nodes_for(edges[i], edges[i + 1], 0.05) for i in range(3))
        _, mins = psi_value(Partition(A, B, t, floor03), g, p03, opts03, node_counts=counts)
        grad = psi_gradient(Partition(A, B, t, floor03), mins)
        for i in range(2):
            e = np.eye(2)[i] * delta
            up = psi_value(Partition(A, B, t + e, floor03), g, p03, opts03, node_counts=counts)[0]
            dn = psi_value(Partition(A, B, t - e, floor03), g, p03, opts03, node_counts=counts)[0]
            assert grad[i] == pytest.approx((up - dn) / (2 * delta), rel=1e-3)

    def test_inadmissible_partition(self, g, p03):
        with pytest.raises(ValueError):
            psi_value(Partition(0, 40, (5,), 10), g, p03)


class TestMaximize:
    def test_symmetric_midpoint(self, g, p0):
        r = maximize_partition(0, 80, 1, +1, g, p0, SYM)
        assert r.partition.points[0] == pytest.approx(40, abs=1e-3)
        assert r.interior and r.converged
        assert r.ratio_stats == pytest.approx((40, 40, 1.0), abs=1e-3)

    def test_symmetric_off_center_start(self, g, p0):
        r = maximize_partition(0, 80, 1, +1, g, p0, SYM, init=[30.0])
        assert r.partition.points[0] == pytest.approx(40, abs=1e-3)

    def test_two_points_stationary(self, two_points):
        r = two_points
        assert r.interior and r.converged
        assert r.max_corner_mismatch <= 1e-4
        assert r.grad_norm <= 1e-6 * (1 + abs(r.psi))
        assert r.max_corner_mismatch <= 1e-4 * (1 + r.slope_scale ** 2)
        assert [m.sign for m in r.minimizers] == [1, -1, 1]
        assert r.psi == math.fsum(m.phi for m in r.minimizers)
        assert all(m.active_set_size == 0 for m in r.minimizers)

    def test_two_points_maximal(self, two_points, g, p03, opts03):
        all_lower, best, values = maximality_probe(two_points, g, p03, opts03, n_probes=50, seed=3)
        assert all_lower and values.size == 50 and best <= two_points.psi

    def test_ascent_is_monotone(self, two_points):
        # both passes use the same node counts here, so the whole trace is comparable
        psis = [row[1] for row in two_points.trace]
        assert all(b >= a - 1e-12 * abs(a) for a, b in zip(psis, psis[1:]))

    def test_projected_ascent_on_concave_quadratic(self):
        target = np.array([3.0, 3.5, 9.0])
        project = lambda x: project_spacing(x, 0.0, 10.0, 1.0)  # noqa: E731

        def evaluate(x, warm):
            return -float(np.sum((x - target) ** 2)), -2 * (x - target), None

        state, _, converged, trace = projected_ascent(np.array([1.0, 2.0, 3.0]), evaluate, project,
                                                      SolverOptions(outer_tol=1e-12))
        assert converged
        np.testing.assert_allclose(state.x, project(target), atol=1e-6)
        psis = [row[1] for row in trace]
        assert all(b >= a for a, b in zip(psis, psis[1:]))

    def test_scaling_bound(self, two_points, g, p03):
        br = make_bracket(g, p03, 0.01)
        lengths = two_points.partition.lengths
        pos, neg = lengths[0::2], lengths[1::2]
        lo = -br.alpha_lower * np.sum(pos ** 3) - br.beta_lower * np.sum(neg ** 3)
        hi = -br.alpha_upper * np.sum(pos ** 3) - br.beta_upper * np.sum(neg ** 3)
        assert lo <= two_points.psi <= hi

    def test_boundary_stuck(self, g, p03, opts03, floor03):
        with pytest.raises(BoundaryStuck):
            maximize_partition(0, 2 * floor03 + 2, 1, +1, g, p03, opts03)

    def test_no_admissible_partition(self, g, p03, opts03, floor03):
        with pytest.raises(BoundaryStuck, match="H"):
            maximize_partition(0, 1.5 * floor03, 1, +1, g, p03, opts03)

    def test_workers_do_not_change_result(self, g, p03, opts03, two_points):
        r = maximize_partition(0, 120, 2, +1, g, p03, dataclasses.replace(opts03, workers=3))
        assert r.psi == two_points.psi
        assert r.partition.points == two_points.partition.points


class TestRatios:
    @pytest.mark.slow
    def test_batch_stability(self, g, p03, opts03):
        results = [maximize_partition(0, 60 * (k + 1), k, +1, g, p03, opts03) for k in range(1, 6)]
        diag = ratio_diagnostics(results)
        assert diag["adjacent_ratio_variation"] <= 0.2
        assert diag["global_ratio_bounded"]
        assert all(row["pigeonhole_ok"] for row in diag["runs"])
        assert diag["h_star"] >= diag["h_bar"] >= 1

    def test_equal_lengths(self):
        assert ratio_stats([40.0, 40.0, 40.0]) == (40.0, 40.0, 1.0)

    @given(k=st.integers(0, 6), seed=st.integers(0, 2 ** 31))
    def test_pigeonhole(self, k, seed):
        A, B, L = 0.0, 300.0, 12.0
        t = random_partition(A, B, k, L, np.random.default_rng(seed))
        P = Partition(A, B, t, L)
        assert P.is_admissible()
        st_ = ratio_stats(P.lengths)
        assert st_.lambda_min_len <= (B - A) / (k + 1) + 1e-9
        assert (B - A) / (k + 1) <= st_.lambda_max_len + 1e-9
