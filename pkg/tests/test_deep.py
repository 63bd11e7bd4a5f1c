import math
from fractions import Fraction

import numpy as np
import pytest

from relunet import catalog
from relunet.deep import (DeepConfig, build_check_net_deep, build_deep_approximator,
                          build_fnet_deep_P2, build_masked_net_deep, build_weight_net_deep,
                          check_deep_arch, check_digit_precision, digit_margins, fnet_deep_arch,
                          masked_deep_depth, weight_deep_arch)
from relunet.errors import ConstructionError, PrecisionOverflowError, RejectedInputError
from relunet.network import evaluate, evaluate_with_probes
from relunet.partitions import CubePartition, inner_cube_contains, locate_cube
from relunet.primitives import mult_d_bound
from relunet.taylor import c46_value, deep_recursion, dyadic_base, fine_corner, pack_digits, taylor_poly
from relunet.wide import WideConfig, build_fnet_P2


def inner_points(cfg, n, rng):
    """Random points at least 2 / M^(2p+2) away from every fine-cube face."""
    d, a, h, M = cfg.d, cfg.a, cfg.h, cfg.M
    X = rng.uniform(-a, a, (n, d))
    P2 = CubePartition(a, M, d, 2)
    keep = inner_cube_contains(P2.left(locate_cube(P2, X)), h, 2.0 / M ** (2 * cfg.f.p + 2), X)
    return X[keep]


def face_points(cfg, rng, n=200):
    d, a, h, M = cfg.d, cfg.a, cfg.h, cfg.M
    X = rng.uniform(-a, a, (n, d))
    X[np.arange(n), rng.integers(0, d, n)] = -a + rng.integers(0, M ** 2, n) * h
    return X


class TestFnet:
    @pytest.mark.parametrize("d,p,M", [(1, 1.0, 3), (1, 2.0, 2), (2, 1.0, 2)])
    def test_matches_deep_recursion(self, d, p, M):
        rng = np.random.default_rng(42)
        f = catalog.sinprod(d, 1.0, 0.5, p=p)
        cfg = DeepConfig(f, 1.0, M)
        net = build_fnet_deep_P2(cfg)
        X = inner_points(cfg, 400, rng)
        ref = deep_recursion(f, 1.0, M, X, c46_value(f, 1.0))
        assert np.max(np.abs(evaluate(net, X) - ref)) <= float(M) ** (-2 * p)

    def test_floor_inputs_exact(self):
        # the floor network sees base * (remaining packed value) + delta, all dyadic
        rng = np.random.default_rng(42)
        f = catalog.sinprod(1, 1.0, 0.5, p=1.0)
        cfg = DeepConfig(f, 1.0, 3)
        net = build_fnet_deep_P2(cfg)
        base = dyadic_base(1)
        margins = cfg.info["digit_margins"]
        X = inner_points(cfg, 300, rng)
        _, probes = evaluate_with_probes(net, X)
        P1 = CubePartition(1.0, 3, 1, 1)
        coarse = locate_cube(P1, X)
        for i, bc in enumerate(cfg.info["b_coefficients"]):
            z = pack_digits(bc.digits[(0,)], 1, base)
            for k, mk in enumerate(margins):
                t = base * z
                want = float(t + Fraction(mk["delta"]))
                np.testing.assert_array_equal(probes[f"floor_input_{k}"][coarse == i, 0], want)
                z = t - math.floor(t)

    @pytest.mark.parametrize("d,p,M", [(1, 1.0, 2), (1, 1.0, 4), (1, 2.0, 3), (2, 1.0, 2), (2, 2.0, 2)])
    def test_architecture(self, d, p, M):
        cfg = DeepConfig(catalog.sinprod(d, p=p), 1.0, M)
        net = build_fnet_deep_P2(cfg)
        L, r = fnet_deep_arch(d, cfg.f.q, M, cfg.precision)
        assert net.depth == L and net.is_constant_width(r)

    def test_depth_affine_in_cells(self):
        f = catalog.sinprod(1, p=1.0)
        depths = [build_fnet_deep_P2(DeepConfig(f, 1.0, M, precision=30, precision_w=20)).depth
                  for M in (2, 3, 4, 5)]
        assert np.all(np.diff(depths) == 4 * np.diff([2, 3, 4, 5]))

    def test_width_independent_of_M(self):
        f = catalog.sinprod(1, p=1.0)
        widths = {build_fnet_deep_P2(DeepConfig(f, 1.0, M)).width for M in (2, 3, 5, 7)}
        assert len(widths) == 1

    def test_agrees_with_wide(self):
        # wide is the exact corner Taylor polynomial, deep carries the digit-corrected estimates
        rng = np.random.default_rng(42)
        f = catalog.sinprod(1, 1.0, 0.5, p=1.0)
        M = 3
        dcfg, wcfg = DeepConfig(f, 1.0, M), WideConfig(f, 1.0, M)
        X = inner_points(dcfg, 400, rng)
        diff = np.abs(evaluate(build_fnet_deep_P2(dcfg), X) - evaluate(build_fnet_P2(wcfg), X))
        bound = math.e * c46_value(f, 1.0) * dcfg.h ** f.p + 2 * float(M) ** (-2 * f.p)
        assert np.max(diff) <= bound

    def test_bad_precision(self):
        with pytest.raises(ConstructionError):
            build_fnet_deep_P2(DeepConfig(catalog.sinprod(1, p=1.0), 1.0, 2, precision=2))


class TestWeight:
    def test_center(self):
        cfg = DeepConfig(catalog.sinprod(2, p=1.0), 1.0, 2)
        net = build_weight_net_deep(cfg)
        P2 = CubePartition(1.0, 2, 2, 2)
        C = P2.left(np.arange(P2.n_cubes)) + cfg.h / 2
        np.testing.assert_allclose(evaluate(net, C), 1.0, atol=mult_d_bound(cfg.precision_w, 1.0, 2))

    def test_bounded(self):
        cfg = DeepConfig(catalog.sinprod(1, p=1.0), 1.0, 3)
        X = np.linspace(-1, 1 - 1e-9, 20001)[:, None]
        assert np.max(np.abs(evaluate(build_weight_net_deep(cfg), X))) <= 2.0

    @pytest.mark.parametrize("d,M", [(1, 2), (1, 5), (2, 2), (2, 3), (3, 2)])
    def test_architecture(self, d, M):
        cfg = DeepConfig(catalog.sinprod(d, p=1.0), 1.0, M)
        net = build_weight_net_deep(cfg)
        L, r = weight_deep_arch(d, M, cfg.precision_w)
        assert net.depth == L and net.is_constant_width(r)


class TestCheck:
    def test_faces(self):
        rng = np.random.default_rng(42)
        cfg = DeepConfig(catalog.sinprod(2, p=1.0), 1.0, 2)
        np.testing.assert_array_equal(evaluate(build_check_net_deep(cfg), face_points(cfg, rng)), 1.0)

    def test_inside(self):
        rng = np.random.default_rng(42)
        cfg = DeepConfig(catalog.sinprod(2, p=1.0), 1.0, 2)
        np.testing.assert_array_equal(evaluate(build_check_net_deep(cfg), inner_points(cfg, 1000, rng)), 0.0)

    def test_ring_range(self):
        cfg = DeepConfig(catalog.sinprod(1, p=1.0), 1.0, 3)
        y = evaluate(build_check_net_deep(cfg), np.linspace(-1, 1 - 1e-9, 40001)[:, None])
        assert np.all((y >= 0) & (y <= 1))

    @pytest.mark.parametrize("d,M", [(1, 2), (1, 4), (2, 2), (2, 3), (3, 2)])
    def test_architecture(self, d, M):
        net = build_check_net_deep(DeepConfig(catalog.sinprod(d, p=1.0), 1.0, M))
        L, r = check_deep_arch(d, M)
        assert net.depth == L and net.is_constant_width(r)


class TestMasked:
    def test_faces_zero(self):
        rng = np.random.default_rng(42)
        cfg = DeepConfig(catalog.sinprod(1, p=1.0), 1.0, 3)
        np.testing.assert_allclose(evaluate(build_masked_net_deep(cfg), face_points(cfg, rng)), 0.0, atol=1e-12)

    @pytest.mark.parametrize("d,p,M", [(1, 1.0, 2), (1, 1.0, 3), (1, 2.0, 2), (2, 1.0, 2), (3, 1.0, 2)])
    def test_depth(self, d, p, M):
        cfg = DeepConfig(catalog.sinprod(d, p=p), 1.0, M)
        net = build_masked_net_deep(cfg)
        assert net.depth == masked_deep_depth(d, cfg.f.q, M, cfg.precision, cfg.precision_w)


class TestApproximator:
    def test_constant(self):
        f = catalog.constant(0.4, d=1, p=1.0)
        net, _ = build_deep_approximator(f, 1.0, 3)
        X = np.linspace(-1, 1, 4001)[:, None]
        assert np.max(np.abs(evaluate(net, X) - 0.4)) <= 2 * 3.0 ** -2

    def test_width_constant_in_M(self):
        f = catalog.sinprod(1, p=1.0)
        widths = {build_deep_approximator(f, 1.0, M)[1]["width"] for M in (2, 3, 4)}
        assert len(widths) == 1

    def test_error_decreases(self):
        f = catalog.holder_bump(1, 1.0)
        X = np.linspace(-1, 1, 20001)[:, None]
        errs = [np.max(np.abs(evaluate(build_deep_approximator(f, 1.0, M)[0], X) - f(X))) for M in (2, 4)]
        assert errs[1] < errs[0]

    def test_taylor_reference_sane(self):
        f = catalog.sinprod(1, 1.0, 0.5, p=1.0)
        X = np.linspace(-1, 1 - 1e-9, 101)[:, None]
        np.testing.assert_allclose(taylor_poly(f, 0, fine_corner(1.0, 2, X), X), f(fine_corner(1.0, 2, X)))

    def test_rejects_small_a(self):
        with pytest.raises(RejectedInputError):
            build_deep_approximator(catalog.sinprod(1, p=1.0), 0.5, 2)


class TestPrecisionCaps:
    @pytest.mark.parametrize("M,d", [(12, 1), (3, 2), (2, 3)])
    def test_allowed(self, M, d):
        check_digit_precision(M, d)

    @pytest.mark.parametrize("M,d", [(13, 1), (4, 2), (3, 3), (7, 2)])
    def test_overflow(self, M, d):
        with pytest.raises(PrecisionOverflowError):
            check_digit_precision(M, d)

    def test_builder_raises(self):
        with pytest.raises(PrecisionOverflowError):
            build_deep_approximator(catalog.sinprod(2, p=1.0), 1.0, 4)

    def test_margins_dyadic(self):
        for M, d in ((5, 1), (3, 2)):
            for mk in digit_margins(M, d):
                assert math.log2(mk["R"]).is_integer() and 1.0 / mk["R"] <= mk["gap"] / 2
