import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dualnehari.errors import GridMismatch, NonPositiveK
from dualnehari.functional import (GridFunction, action, action_gradient, action_hessian_apply, hessian_bands,
                                   limit_minimizer, nodes_for, read_grid_csv, sample, scale_to_unit,
                                   scaled_action, unscale)
from dualnehari.problem import constant_forcing, zero_reaction


def fd_gradient(u, g, p, step=1e-6):
    out = np.empty(u.n)
    for i in range(u.n):
        e = np.zeros(u.n)
        e[i] = step
        out[i] = (action(u.with_values(u.values + e), g, p).value
                  - action(u.with_values(u.values - e), g, p).value) / (2 * step)
    return out


class TestGridFunction:
    def test_spacing(self):
        u = GridFunction(0.0, 1.0, np.zeros(999))
        assert u.h == 1e-3
        assert u.nodes[0] == pytest.approx(1e-3) and u.nodes[-1] == pytest.approx(0.999)

    @pytest.mark.parametrize("a,b,vals", [(1, 1, np.zeros(5)), (0, 1, np.zeros(2)), (0, 1, [0, np.nan, 0])])
    def test_invalid(self, a, b, vals):
        with pytest.raises(ValueError):
            GridFunction(a, b, vals)

    def test_read_only(self):
        u = GridFunction(0, 1, np.ones(4))
        with pytest.raises(ValueError):
            u.values[0] = 3.0

    def test_csv_round_trip(self, tmp_path, rng):
        u = GridFunction(2.0, 5.0, rng.normal(size=17))
        u.to_csv(tmp_path / "u.csv")
        lines = (tmp_path / "u.csv").read_text().splitlines()
        assert lines[0] == "t,u" and len(lines) == 20
        v = read_grid_csv(tmp_path / "u.csv")
        assert v.a == u.a and v.b == u.b and np.array_equal(v.values, u.values)

    def test_nodes_for(self):
        n = nodes_for(0, 40, 0.05)
        assert (40 / (n + 1)) <= 0.05 and n == 799


class TestAction:
    def test_zero(self, g, pcos):
        v = action(GridFunction(0, 10, np.zeros(50)), g, pcos)
        assert v == (0.0, 0.0, 0.0, 0.0)

    def test_parabola_kinetic(self):
        u = sample(lambda t: 0.5 * t * (1 - t), 0.0, 1.0, 999)
        v = action(u, zero_reaction(), constant_forcing(0.0))
        assert abs(v.kinetic - 1 / 24) <= 1e-5

    def test_parts_add_up(self, g, pcos, rng):
        u = GridFunction(0, 10, rng.normal(size=60))
        v = action(u, g, pcos)
        assert v.value == v.kinetic - v.potential + v.forcing

    def test_scaled_parabola_kinetic_cubic_growth(self):
        kin = []
        for T in (5.0, 10.0):
            u = sample(lambda t: T ** 2 * 0.5 * (t / T) * (1 - t / T), 0.0, T, 999)
            kin.append(action(u, zero_reaction(), constant_forcing(0.0)).kinetic)
        assert kin[1] / kin[0] == pytest.approx(8.0, rel=1e-12)

    def test_grid_refinement_order(self, g, pcos):
        f = lambda t: 3 * np.sin(np.pi * t / 10) ** 2 + t * (10 - t)
        vals = [action(sample(f, 0, 10, n), g, pcos).value for n in (49, 99, 199, 399)]
        exact = vals[-1] + (vals[-1] - vals[-2]) / 3
        errs = np.abs(np.array(vals[:-1]) - exact)
        orders = np.log2(errs[:-1] / errs[1:])
        assert np.all(orders >= 1.9)


class TestGradient:
    def test_zero_critical(self, g, p0):
        grad = action_gradient(GridFunction(0, 3, np.zeros(20)), g, p0)
        assert np.all(grad.values == 0)

    def test_limit_parabola_exact(self):
        k = 1.7
        u = sample(lambda t: 0.5 * k * t * (1 - t), 0, 1, 199)
        grad = action_gradient(u, zero_reaction(), constant_forcing(-k))
        assert np.max(np.abs(grad.values)) <= 1e-12

    def test_matches_finite_differences(self, g, pcos, rng):
        for _ in range(20):
            u = GridFunction(0, 10, rng.normal(scale=3, size=40))
            fd = fd_gradient(u, g, pcos)
            err = np.max(np.abs(action_gradient(u, g, pcos).values - fd)) / (1 + np.max(np.abs(fd)))
            assert err <= 1e-5

    def test_hessian_matches_gradient_derivative(self, g, pcos, rng):
        u = GridFunction(0, 10, rng.normal(scale=3, size=40))
        v = u.with_values(rng.normal(size=40))
        eps = 1e-6
        fd = (action_gradient(u.with_values(u.values + eps * v.values), g, pcos).values
              - action_gradient(u.with_values(u.values - eps * v.values), g, pcos).values) / (2 * eps)
        hv = action_hessian_apply(u, v, g).values
        assert np.max(np.abs(hv - fd)) <= 1e-5 * (1 + np.max(np.abs(fd)))


class TestHessian:
    def test_zero_direction(self, g, rng):
        u = GridFunction(0, 1, rng.normal(size=10))
        assert np.all(action_hessian_apply(u, u.with_values(np.zeros(10)), g).values == 0)

    def test_sine_eigenvector(self, g):
        u = GridFunction(0, 1, np.zeros(999))
        v = sample(lambda t: np.sin(np.pi * t), 0, 1, 999)
        hv = action_hessian_apply(u, v, g).values
        ratio = hv / (u.h * v.values)
        assert np.allclose(ratio, math.pi ** 2 - 1, rtol=1e-3)

    @given(st.integers(0, 2 ** 31 - 1))
    def test_symmetry(self, seed):
        from dualnehari.problem import arctan_reaction
        r = np.random.default_rng(seed)
        g = arctan_reaction()
        u, v, w = (GridFunction(0, 4, r.normal(scale=5, size=30)) for _ in range(3))
        lhs = np.dot(action_hessian_apply(u, v, g).values, w.values)
        rhs = np.dot(v.values, action_hessian_apply(u, w, g).values)
        assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))

    def test_bands_agree_with_apply(self, g, rng):
        u = GridFunction(0, 4, rng.normal(size=12))
        d, o = hessian_bands(u, g)
        H = np.diag(d) + np.diag(o, 1) + np.diag(o, -1)
        v = rng.normal(size=12)
        assert np.allclose(H @ v, action_hessian_apply(u, u.with_values(v), g).values, atol=1e-12)

    def test_mismatch(self, g):
        with pytest.raises(GridMismatch):
            action_hessian_apply(GridFunction(0, 1, np.zeros(5)), GridFunction(0, 1, np.zeros(6)), g)


class TestScaling:
    def test_unit_interval_identity(self, rng):
        u = GridFunction(0, 1, rng.normal(size=9))
        assert np.array_equal(scale_to_unit(u).values, u.values)

    def test_parabola_maps_to_w1(self):
        u = sample(lambda t: 0.5 * t * (10 - t), 0, 10, 99)
        w, _ = limit_minimizer(1.0, 99)
        assert np.allclose(scale_to_unit(u).values, w.values, atol=1e-14)

    @given(arrays(float, st.integers(3, 40), elements=st.floats(-1e3, 1e3)))
    def test_round_trip(self, vals):
        u = GridFunction(2, 47, vals)
        back = unscale(scale_to_unit(u), 2, 47)
        assert np.allclose(back.values, u.values, rtol=1e-14, atol=1e-12)

    @given(st.integers(0, 2 ** 31 - 1), st.floats(-5, 5), st.floats(1, 60))
    def test_action_identity(self, seed, a, length):
        from dualnehari.problem import arctan_reaction, trig_forcing
        g = arctan_reaction()
        p = trig_forcing(0.3, [(1.0, 0.5, 0.0)])
        r = np.random.default_rng(seed)
        b = a + length
        u = GridFunction(a, b, r.normal(scale=length ** 2 / 8, size=25))
        J = action(u, g, p).value
        Jhat = scaled_action(scale_to_unit(u), a, b, g, p)
        assert J == pytest.approx(length ** 3 * Jhat, rel=1e-10, abs=1e-10 * (1 + abs(J)))


class TestLimit:
    def test_values(self):
        w, val = limit_minimizer(1.0, 999)
        assert w.values[499] == pytest.approx(1 / 8)
        assert val == pytest.approx(-1 / 24)

    def test_arctan_margin_value(self):
        k = math.pi / 2 - 0.3
        _, val = limit_minimizer(k, 9)
        assert val == pytest.approx(-k * k / 24, rel=1e-14)
        # the quoted reference -0.0672896 is good to about one unit in its 6th digit
        assert val == pytest.approx(-0.0672896, abs=2e-6)

    def test_one_sided_slope(self):
        k = 2.0
        w, _ = limit_minimizer(k, 999)
        assert abs(w.values[0] / w.h - k / 2) <= k * w.h

    @pytest.mark.parametrize("k", [0.0, -1.0])
    def test_non_positive(self, k):
        with pytest.raises(NonPositiveK):
            limit_minimizer(k, 10)
