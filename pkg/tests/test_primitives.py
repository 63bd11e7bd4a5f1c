import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relunet.errors import RejectedInputError
from relunet.network import evaluate
from relunet.primitives import (build_identity, build_indicator, build_mult, build_mult_d,
                                build_poly, build_square, build_test, build_trunc, eval_poly,
                                monomials, mult_bound, mult_d_bound, mult_d_min_R, poly_arch,
                                poly_bound, sawtooth_interpolant, square_bound, tooth_iterate)


class TestIdentity:
    def test_passthrough(self):
        net = build_identity(0, 1)
        assert net.depth == 0 and evaluate(net, [1.25]) == 1.25

    def test_vector(self):
        np.testing.assert_array_equal(evaluate(build_identity(3, 2), [-1.0, 4.0]), [-1.0, 4.0])

    def test_architecture(self):
        net = build_identity(4, 3)
        assert net.depth == 4 and net.is_constant_width(6)

    def test_bitwise_on_random_values(self):
        rng = np.random.default_rng(42)
        X = rng.normal(scale=1e3, size=(500, 2))
        np.testing.assert_array_equal(evaluate(build_identity(5, 2), X), X)


class TestSquare:
    def test_zero_exact(self):
        for R in (1, 4, 9):
            for a in (1, 2, 5):
                assert evaluate(build_square(R, a), [0.0]) == 0.0

    def test_interpolation_node(self):
        assert evaluate(build_square(2, 1), [-0.5]) == 0.25

    def test_architecture(self):
        net = build_square(7, 3)
        assert net.depth == 7 and net.is_constant_width(9)

    def test_bound_small_grid(self):
        X = np.linspace(-2, 2, 20001)[:, None]
        for R in (1, 3, 6):
            err = np.max(np.abs(evaluate(build_square(R, 2), X) - X[:, 0] ** 2))
            assert err <= square_bound(R, 2) * (1 + 1e-12)

    def test_sawtooth_matches_reference(self):
        # S_R interpolates x^2 at the nodes k / 2^R
        t = np.arange(0, 17) / 16.0
        np.testing.assert_allclose(sawtooth_interpolant(t, 4), t ** 2, atol=1e-15)

    def test_tooth_count(self):
        x = np.linspace(0, 1, 1025)
        g = tooth_iterate(x, 3)
        # 2^(s-1) teeth: peaks of value 1
        assert np.sum(np.isclose(g, 1.0)) == 4

    def test_saturation_outside(self):
        assert evaluate(build_square(5, 1), [3.0]) == pytest.approx(1.0)

    def test_rejects(self):
        with pytest.raises(RejectedInputError):
            build_square(0, 1)


class TestMult:
    def test_zero(self):
        assert evaluate(build_mult(6, 1), [0.0, 0.0]) == 0.0

    def test_bound_a1_R8(self):
        g = np.linspace(-1, 1, 101)
        X = np.array(np.meshgrid(g, g)).reshape(2, -1).T
        err = np.max(np.abs(evaluate(build_mult(8, 1), X) - X[:, 0] * X[:, 1]))
        assert err <= 2 * 4.0 ** -8

    def test_near_symmetric(self):
        # the two orders feed f_sq(x - y) and f_sq(y - x), equal up to rounding of the even interpolant
        rng = np.random.default_rng(42)
        X = rng.uniform(-1, 1, (1000, 2))
        net = build_mult(8, 1)
        np.testing.assert_allclose(evaluate(net, X), evaluate(net, X[:, ::-1]), atol=1e-12)

    def test_architecture(self):
        net = build_mult(5, 2)
        assert net.depth == 5 and net.is_constant_width(18)


class TestMultD:
    def test_d1_identity_like(self):
        x = np.linspace(-1, 1, 51)[:, None]
        R = mult_d_min_R(1, 1)
        err = np.max(np.abs(evaluate(build_mult_d(R, 1, 1), x) - x[:, 0]))
        assert err <= mult_bound(R, 4.0)

    def test_d2_bounds(self):
        g = np.linspace(-1, 1, 81)
        X = np.array(np.meshgrid(g, g)).reshape(2, -1).T
        err = np.max(np.abs(evaluate(build_mult_d(10, 1, 2), X) - X[:, 0] * X[:, 1]))
        assert err <= 4.0 ** 9 * 2 * 4.0 ** -10
        # the tree of depth one is a single f_mult on radius 4^d a^d = 16
        assert err <= mult_bound(10, 16.0)

    def test_all_ones(self):
        for d in (2, 3, 5):
            R = mult_d_min_R(1, d)
            assert abs(evaluate(build_mult_d(R, 1, d), np.ones(d)) - 1.0) <= mult_d_bound(R, 1, d)

    def test_architecture(self):
        for d in (2, 3, 4, 5):
            R = mult_d_min_R(1, d) + 1
            net = build_mult_d(R, 1, d)
            assert net.depth == R * math.ceil(math.log2(d)) and net.is_constant_width(18 * d)

    def test_min_R_message(self):
        with pytest.raises(RejectedInputError, match="minimal admissible R is"):
            build_mult_d(3, 1, 3)


class TestPoly:
    def test_monomial_count(self):
        assert len(monomials(2, 2)) == 6
        for d in (1, 2, 3):
            for N in (0, 1, 3):
                assert len(monomials(d, N)) == math.comb(d + N, d)

    def test_zero_coefficients(self):
        rng = np.random.default_rng(42)
        net = build_poly(8, 1, 1, 1, np.zeros(2))
        X = rng.uniform(-1, 1, (100, 3))
        np.testing.assert_array_equal(evaluate(net, X), np.zeros(100))

    def test_linear_case(self):
        # p(x, y1, y2) = y1 + y2 x
        R = 12
        net = build_poly(R, 1, 1, 1, [1.0, 1.0])
        g = np.linspace(-1, 1, 21)
        X = np.array(np.meshgrid(g, g, g)).reshape(3, -1).T
        ref = X[:, 1] + X[:, 2] * X[:, 0]
        err = np.max(np.abs(evaluate(net, X) - ref))
        assert err <= poly_bound(R, 1, 1, [1.0, 1.0])
        assert err <= 2 * mult_bound(R, 16.0)

    def test_architecture(self):
        for d, N in ((1, 1), (2, 2), (1, 3)):
            L, r = poly_arch(N, d)
            R = 14
            net = build_poly(R, 1, N, d, np.ones(math.comb(d + N, d)))
            assert net.depth == R * L and net.is_constant_width(r)

    def test_against_formula(self):
        rng = np.random.default_rng(42)
        d, N, R = 2, 2, 20
        c = rng.uniform(-1, 1, 6)
        net = build_poly(R, 1, N, d, c)
        X = rng.uniform(-1, 1, (300, d + 6))
        err = np.max(np.abs(evaluate(net, X) - eval_poly(X[:, :d], X[:, d:], N, c)))
        assert err <= poly_bound(R, 1, N, c)

    def test_wrong_length(self):
        with pytest.raises(RejectedInputError):
            build_poly(10, 1, 2, 2, np.ones(5))


class TestIndicator:
    def test_inside(self):
        net = build_indicator(100, [0.0, 0.0], [1.0, 1.0])
        assert evaluate(net, [0.5, 0.5]) == 1.0

    def test_outside(self):
        net = build_indicator(100, [0.0, 0.0], [1.0, 1.0])
        assert evaluate(net, [-0.01, 0.5]) == 0.0
        assert evaluate(net, [0.5, 1.0]) == 0.0

    def test_margin_range(self):
        net = build_indicator(10, [0.0], [1.0])
        X = np.linspace(-0.1, 0.2, 301)[:, None]
        y = evaluate(net, X)
        assert np.all((y >= 0) & (y <= 1))

    def test_architecture(self):
        net = build_indicator(10, [0.0] * 3, [1.0] * 3)
        assert net.depth == 2 and net.is_constant_width(6)


class TestTest:
    def test_inside(self):
        net = build_test(100, 1)
        assert evaluate(net, [0.5, 0.0, 1.0, 7.0]) == 7.0

    def test_outside(self):
        net = build_test(100, 2)
        rng = np.random.default_rng(42)
        for s in rng.uniform(-50, 50, 20):
            assert evaluate(net, [1.5, 0.5, 0.0, 0.0, 1.0, 1.0, s]) == 0.0

    def test_zero_gate(self):
        net = build_test(100, 1)
        X = np.column_stack([np.linspace(-1, 2, 50), np.zeros(50), np.ones(50), np.zeros(50)])
        np.testing.assert_array_equal(evaluate(net, X), np.zeros(50))

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-3, 3), st.floats(-50, 50))
    def test_exact_off_margins(self, x, s):
        R = 100
        if min(abs(x), abs(x - 1)) < 1.0 / R:
            return
        net = build_test(R, 1)
        expect = s if 0 <= x < 1 else 0.0
        assert evaluate(net, [x, 0.0, 1.0, s]) == pytest.approx(expect, abs=1e-12)


class TestTrunc:
    def test_floor(self):
        # R = 10 is not dyadic, so exactness holds to rounding
        assert evaluate(build_trunc(10, 4), [2.5]) == pytest.approx(2.0, rel=1e-12)
        assert evaluate(build_trunc(16, 4), [2.5]) == 2.0

    def test_below_first(self):
        assert evaluate(build_trunc(10, 4), [0.3]) == 0.0

    def test_margin_range(self):
        net = build_trunc(10, 4)
        for j in range(1, 5):
            v = evaluate(net, [j + 0.5 / 10])
            assert j - 1 <= v <= j

    def test_architecture(self):
        net = build_trunc(8, 6)
        assert net.depth == 1 and net.is_constant_width(12)

    def test_exact_off_margins(self):
        R, B = 16, 6
        z = np.linspace(0, B + 1 - 1e-9, 5001)
        keep = (z - np.floor(z)) >= 1.0 / R
        y = evaluate(build_trunc(R, B), z[keep][:, None])
        np.testing.assert_array_equal(y, np.floor(z[keep]))
