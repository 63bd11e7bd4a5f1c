import itertools

import numpy as np
import pytest

from relunet import catalog, hierarchy
from relunet.errors import RejectedInputError, ValidationError
from relunet.hierarchy import (HierarchicalModel, build_t1, build_t2, enumerate_nodes,
                               evaluate_model, fig2_model, induction_envelope, t1_arch, t2_arch,
                               toy_model)
from relunet.network import evaluate, evaluate_with_probes


@pytest.fixture(scope="module")
def toy_t1():
    return build_t1(toy_model(), 2)


@pytest.fixture(scope="module")
def toy_t2():
    return build_t2(toy_model(), 2)


class TestModel:
    def test_fig2_nodes(self):
        nodes = enumerate_nodes(fig2_model())
        assert nodes["N_tilde"] == [3, 1] and nodes["total"] == 4
        assert nodes["flat"][-1] == (2, 1, 4)

    def test_evaluate_brute_force(self):
        rng = np.random.default_rng(42)
        m = fig2_model()
        X = rng.uniform(-1, 1, (50, 7))
        g1, g2, g3 = m.levels[0]
        top = m.levels[1][0]
        for x in X:
            h = [g1(x[None, 0:2])[0], g2(x[None, 2:5])[0], g3(x[None, 5:7])[0]]
            assert evaluate_model(m, x) == pytest.approx(top(np.array([h]))[0], rel=1e-14, abs=1e-14)

    def test_selector_reuse(self):
        levels = [[catalog.sinprod(1), catalog.sinprod(1)], [catalog.sinprod(2)]]
        m = HierarchicalModel(1, levels, [0, 0])
        x = np.array([[0.3]])
        v = catalog.sinprod(1)(x)[0]
        assert evaluate_model(m, x)[0] == pytest.approx(catalog.sinprod(2)(np.array([[v, v]]))[0])

    def test_arity_mismatch(self):
        levels = [[catalog.sinprod(1), catalog.sinprod(1)], [catalog.sinprod(3)]]
        with pytest.raises(ValidationError):
            HierarchicalModel(2, levels, [0, 1])

    def test_selector_length(self):
        with pytest.raises(ValidationError):
            HierarchicalModel(2, [[catalog.sinprod(2)]], [0])

    def test_top_single(self):
        with pytest.raises(ValidationError):
            HierarchicalModel(2, [[catalog.sinprod(1), catalog.sinprod(1)]], [0, 1])

    def test_radius(self):
        m = toy_model()
        assert m.radius() == 2 * max(m.g_max(), m.a) and m.lipschitz() >= 1


class TestT1:
    def test_depth(self, toy_t1):
        net, info = toy_t1
        assert net.depth == toy_model().l * info["L0"]

    def test_levels_compose_members(self, toy_t1):
        # the network equals the members evaluated level by level
        rng = np.random.default_rng(42)
        m = toy_model()
        net, info = toy_t1
        X = rng.uniform(-1, 1, (300, 2))
        env = induction_envelope(m, info["members"], X)
        np.testing.assert_allclose(evaluate(net, X), env["values"], rtol=1e-10, atol=1e-10)

    def test_envelope_holds(self, toy_t1):
        rng = np.random.default_rng(42)
        m = toy_model()
        net, info = toy_t1
        X = rng.uniform(-1, 1, (300, 2))
        env = induction_envelope(m, info["members"], X)
        assert np.max(np.abs(evaluate(net, X) - evaluate_model(m, X))) <= env["envelopes"][-1]

    def test_theorem_arch(self, toy_t1):
        _, info = toy_t1
        assert (info["theorem_L"], info["theorem_r"]) == t1_arch(toy_model(), 2)

    def test_grid_shape(self):
        with pytest.raises(RejectedInputError):
            build_t1(toy_model(), [[2], [2]])


class TestT2:
    def test_rails_bitwise(self, toy_t2):
        rng = np.random.default_rng(42)
        net, _ = toy_t2
        X = rng.uniform(-1, 1, (300, 2))
        _, probes = evaluate_with_probes(net, X)
        for N in (1, 2, 3):
            np.testing.assert_array_equal(probes[f"rail_x_{N}"], X)

    def test_width_independent_of_M(self, toy_t2):
        net, _ = toy_t2
        other, _ = build_t2(toy_model(), [[3, 2], [2]])
        assert other.width == net.width

    def test_depth_sum_of_members(self, toy_t2):
        net, info = toy_t2
        assert net.depth == sum(mem.depth for mem in info["members"].values())

    def test_envelope_holds(self, toy_t2):
        rng = np.random.default_rng(42)
        m = toy_model()
        net, info = toy_t2
        X = rng.uniform(-1, 1, (300, 2))
        env = induction_envelope(m, info["members"], X)
        np.testing.assert_allclose(evaluate(net, X), env["values"], rtol=1e-10, atol=1e-10)
        assert np.max(np.abs(evaluate(net, X) - evaluate_model(m, X))) <= env["envelopes"][-1]

    def test_theorem_arch(self, toy_t2):
        _, info = toy_t2
        assert (info["theorem_L"], info["theorem_r"]) == t2_arch(toy_model(), 2)


class TestEnvelope:
    def test_arithmetic(self, monkeypatch):
        # exact components with one offset member: the offset propagates through K C_Lip
        m = toy_model()
        members = {(i + 1, j + 1): g for i, lev in enumerate(m.levels) for j, g in enumerate(lev)}
        X = np.array(list(itertools.product(np.linspace(-1, 1, 5), repeat=2)))
        monkeypatch.setattr(hierarchy, "evaluate", lambda g, U: g(U) + (0.01 if g is m.levels[0][0] else 0.0))
        env = induction_envelope(m, members, X)
        C = m.lipschitz()
        assert env["member_errors"][1, 1] == pytest.approx(0.01)
        assert env["envelopes"][0] == pytest.approx(0.01)
        assert env["envelopes"][1] == pytest.approx(env["member_errors"][2, 1] + 2 * C * 0.01)
