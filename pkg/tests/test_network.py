import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relunet.errors import ParseError, RejectedInputError
from relunet.network import (Network, affine, compose, conform, count_parameters, deserialize,
                             evaluate, evaluate_with_probes, pad_depth, pad_width, parallelize,
                             serialize, stored_entries, with_probe)
from relunet.primitives import build_identity, build_square


def random_net(rng, d, widths, k=1):
    layers, prev = [], d
    for w in widths:
        layers.append((rng.normal(size=(w, prev)), rng.normal(size=w)))
        prev = w
    return Network(d, layers, rng.normal(size=(k, prev)), rng.normal(size=k))


def loop_eval(net, x):
    """Straight-loop recomputation of the layer recursion, one neuron at a time."""
    h = list(x)
    for w, b in net.layers:
        W = w.toarray()
        h = [max(0.0, sum(W[i, j] * h[j] for j in range(len(h))) + b[i]) for i in range(W.shape[0])]
    A = net.out_weights.toarray()
    return [sum(A[i, j] * h[j] for j in range(len(h))) + net.out_bias[i] for i in range(A.shape[0])]


class TestEvaluate:
    def test_single_neuron(self):
        net = Network(1, [([[1.0]], [0.0])], [[1.0]], [0.0])
        assert evaluate(net, [3.0]) == 3.0

    def test_identity_negative(self):
        assert evaluate(build_identity(1, 1), [-2.5]) == -2.5

    def test_against_loop_recursion(self):
        rng = np.random.default_rng(42)
        net = random_net(rng, 3, [5, 4])
        X = rng.normal(size=(20, 3))
        ref = np.array([loop_eval(net, x)[0] for x in X])
        np.testing.assert_allclose(evaluate(net, X), ref, rtol=1e-12, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(RejectedInputError):
            evaluate(build_identity(1, 2), [1.0, 2.0, 3.0])

    def test_batch_chunking(self):
        rng = np.random.default_rng(42)
        net = random_net(rng, 2, [6])
        X = rng.normal(size=(20000, 2))
        single = np.array([evaluate(net, x) for x in X[::997]])
        np.testing.assert_allclose(evaluate(net, X)[::997], single, rtol=1e-14)


class TestCompose:
    def test_figure_wiring(self):
        f = Network(1, [([[2.0]], [0.0])], [[3.0]], [0.0])
        g = Network(1, [([[1.0]], [0.0])], [[4.0]], [0.0])
        h = compose(f, g)
        assert h.depth == 2
        assert h.layers[0][0].toarray()[0, 0] == 1.0
        assert h.layers[1][0].toarray()[0, 0] == 8.0
        assert h.out_weights.toarray()[0, 0] == 3.0

    def test_identity_left(self):
        rng = np.random.default_rng(42)
        g = random_net(rng, 1, [4, 4])
        X = np.linspace(-2, 2, 100)[:, None]
        np.testing.assert_allclose(evaluate(compose(build_identity(1, 1), g), X), evaluate(g, X),
                                   rtol=1e-12, atol=1e-12)

    def test_square_after_identity(self):
        net = compose(build_square(4, 2), build_identity(3, 1))
        assert abs(evaluate(net, [0.7]) - evaluate(build_square(4, 2), [0.7])) <= 1e-12
        assert net.depth == 7

    def test_shape_mismatch(self):
        with pytest.raises(RejectedInputError):
            compose(build_identity(1, 2), build_identity(1, 1))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(0, 3), st.integers(0, 3))
    def test_depth_adds_and_values_match(self, seed, Lf, Lg):
        rng = np.random.default_rng(seed)
        g = random_net(rng, 2, [3] * Lg, k=2)
        f = random_net(rng, 2, [4] * Lf)
        X = rng.normal(size=(50, 2))
        h = compose(f, g)
        assert h.depth == Lf + Lg
        np.testing.assert_allclose(evaluate(h, X), evaluate(f, evaluate(g, X)), rtol=1e-12, atol=1e-10)


class TestParallelize:
    def test_identities(self):
        net = parallelize([build_identity(1, 1), build_identity(1, 1)])
        np.testing.assert_array_equal(evaluate(net, [1.0]), [1.0, 1.0])

    def test_widths_add(self):
        rng = np.random.default_rng(42)
        net = parallelize([random_net(rng, 2, [5, 5]), random_net(rng, 2, [3, 3])])
        assert net.widths == [8, 8]

    def test_member_equivalence(self):
        rng = np.random.default_rng(42)
        members = [random_net(rng, 3, [4, 2]), random_net(rng, 3, [2, 6]), random_net(rng, 3, [1, 1])]
        X = rng.normal(size=(1000, 3))
        out = evaluate(parallelize(members), X)
        for k, m in enumerate(members):
            np.testing.assert_allclose(out[:, k], evaluate(m, X), rtol=1e-12, atol=1e-12)

    def test_depth_mismatch(self):
        with pytest.raises(RejectedInputError):
            parallelize([build_identity(1, 1), build_identity(2, 1)])


class TestPadding:
    def test_pad_identity(self):
        X = np.linspace(-3, 3, 50)[:, None]
        np.testing.assert_array_equal(evaluate(pad_depth(build_identity(1, 1), 5), X), X[:, 0])

    def test_pad_square(self):
        X = np.linspace(-1, 1, 201)[:, None]
        net = build_square(3, 1)
        np.testing.assert_allclose(evaluate(pad_depth(net, 7), X), evaluate(net, X), rtol=1e-12, atol=1e-12)

    def test_depth(self):
        assert pad_depth(build_square(2, 1), 9).depth == 9

    def test_pad_width_and_conform(self):
        net = conform(build_square(3, 1), 5, 12)
        assert net.depth == 5 and net.is_constant_width(12)
        with pytest.raises(RejectedInputError):
            pad_width(build_square(3, 1), 8)
        with pytest.raises(RejectedInputError):
            pad_depth(build_square(3, 1), 2)

    def test_probe_survives_padding(self):
        net = with_probe(build_identity(2, 1), "mid", 1, [[1.0, -1.0]])
        _, pr = evaluate_with_probes(pad_width(net, 5), np.array([[0.75]]))
        assert pr["mid"][0, 0] == 0.75


class TestCountParameters:
    def test_small(self):
        assert count_parameters(1, 1, 1) == 4

    def test_formula_value(self):
        assert count_parameters(4, 2, 5) == 61

    def test_matches_stored_entries(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            d, L, r = (int(v) for v in rng.integers(1, 6, size=3))
            net = random_net(rng, d, [r] * L)
            assert count_parameters(d, L, r) == stored_entries(net)

    def test_constructed_network(self):
        net = build_square(5, 2)
        assert count_parameters(1, 5, 9) == stored_entries(net)


class TestSerialization:
    def test_identity_roundtrip(self):
        net = build_identity(1, 1)
        back = deserialize(serialize(net))
        for (w1, b1), (w2, b2) in zip(net.layers, back.layers):
            np.testing.assert_array_equal(w1.toarray(), w2.toarray())
            np.testing.assert_array_equal(b1, b2)

    def test_square_bitwise(self):
        net = build_square(6, 2)
        X = np.linspace(-2, 2, 1000)[:, None]
        np.testing.assert_array_equal(evaluate(deserialize(serialize(net)), X), evaluate(net, X))

    def test_document_layout(self):
        doc = json.loads(serialize(build_square(2, 1)))
        assert doc["version"] == 1 and doc["input_dim"] == 1 and doc["widths"] == [9, 9]
        assert len(doc["layers"][1]["weights"]) == 9

    def test_mismatched_widths(self):
        doc = json.loads(serialize(build_square(2, 1)))
        doc["widths"] = [9, 8]
        with pytest.raises(ParseError):
            deserialize(json.dumps(doc))

    def test_bad_row_length(self):
        doc = json.loads(serialize(build_square(2, 1)))
        doc["layers"][1]["weights"][0] = doc["layers"][1]["weights"][0][:-1]
        with pytest.raises(ParseError) as err:
            deserialize(json.dumps(doc))
        assert "layers[1]" in err.value.path

    def test_nonfinite_rejected(self):
        net = Network(1, [([[np.inf]], [0.0])], [[1.0]], [0.0])
        with pytest.raises(RejectedInputError):
            serialize(net)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_random_roundtrip_bitwise(self, seed):
        rng = np.random.default_rng(seed)
        net = random_net(rng, 2, list(rng.integers(1, 5, size=rng.integers(0, 4))), k=2)
        X = rng.normal(size=(30, 2))
        np.testing.assert_array_equal(evaluate(deserialize(serialize(net)), X), evaluate(net, X))


def test_affine_depth_zero():
    net = affine([[2.0, -1.0]], [0.5])
    assert net.depth == 0
    assert evaluate(net, [1.0, 1.0]) == 1.5
