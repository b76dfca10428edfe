import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from nncdf.geometry import integrate_polynomial_over_simplex, integrate_simplices
from nncdf.model import (
    ActivationKind,
    BetaProduct,
    Box,
    DimensionError,
    ExplicitPiecewisePolynomial,
    FeedforwardNetwork,
    Interval,
    Layer,
    NetworkFormatError,
    NotExactlyPolynomial,
    TruncatedGaussianMixture,
    UniformBox,
    distribution_from_dict,
    load_distribution,
    load_network,
    pdf_as_piecewise_polynomial,
    propagate_box,
    save_distribution,
    save_network,
)

from conftest import random_net


class TestActivations:
    @pytest.mark.parametrize("kind", list(ActivationKind))
    def test_derivatives_match_finite_differences(self, kind):
        x = np.linspace(0.3, 2.0, 17) if kind is ActivationKind.LOG else np.linspace(-2, 2, 17) + 0.013
        h = 1e-6
        fd1 = (kind(x + h) - kind(x - h)) / (2 * h)
        fd2 = (kind(x + h) - 2 * kind(x) + kind(x - h)) / h**2
        np.testing.assert_allclose(kind.derivative(x), fd1, atol=1e-6, rtol=1e-6)
        np.testing.assert_allclose(kind.second_derivative(x), fd2, atol=2e-3, rtol=1e-3)

    def test_logistic_is_stable(self):
        s = ActivationKind.LOGISTIC(np.array([-800.0, 0.0, 800.0]))
        np.testing.assert_array_equal(s, [0.0, 0.5, 1.0])

    def test_unknown_tag(self):
        with pytest.raises(ValueError, match="unknown activation"):
            ActivationKind.parse("swish")

    def test_inflection_sets(self):
        assert ActivationKind.TANH.breakpoints == (0.0,)
        assert ActivationKind.LOGISTIC.breakpoints == (0.0,)
        assert ActivationKind.RELU.left_derivative(0.0) == 0.0
        assert ActivationKind.RELU.right_derivative(0.0) == 1.0

    @pytest.mark.parametrize("kind", [ActivationKind.TANH, ActivationKind.LOGISTIC])
    def test_curvature_sign_flips_at_zero(self, kind):
        assert kind.second_derivative(-0.5) > 0 > kind.second_derivative(0.5)


class TestNetwork:
    def test_identity_layer(self):
        net = FeedforwardNetwork.from_arrays([[[1.0]]], [[0.0]], ["identity"])
        assert net.n_inputs == net.n_outputs == 1
        np.testing.assert_array_equal(net(np.array([[0.3]])), [[0.3]])

    def test_dimension_chain_is_checked(self):
        with pytest.raises(DimensionError, match="layer 1"):
            FeedforwardNetwork([Layer(np.ones((3, 2)), np.zeros(3)), Layer(np.ones((1, 4)), np.zeros(1))])

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            Layer([[np.nan]], [0.0])

    def test_arrays_are_read_only(self, rng):
        net = random_net(rng, [2, 3, 1])
        with pytest.raises(ValueError):
            net.layers[0].weights[0, 0] = 1.0

    def test_select_output(self, rng):
        net = random_net(rng, [2, 4, 3])
        X = rng.uniform(size=(5, 2))
        np.testing.assert_allclose(net.select_output(2)(X)[:, 0], net(X)[:, 2], rtol=1e-14, atol=1e-15)


class TestPropagateBox:
    def test_identity(self):
        net = FeedforwardNetwork.from_arrays([[[1.0]]], [[0.0]], ["identity"])
        out = propagate_box(net, Box([0.0], [1.0])).output
        np.testing.assert_array_equal([out.lower, out.upper], [[0.0], [1.0]])

    def test_single_relu_neuron(self):
        net = FeedforwardNetwork.from_arrays([[[1.0]]], [[-0.5]], ["relu"])
        p = propagate_box(net, Box([0.0], [1.0]))
        assert p.pre_interval(0, 0) == Interval(-0.5, 0.5)
        assert p.post_interval(0, 0) == Interval(0.0, 0.5)

    def test_output_box_contains_samples(self, rng):
        net = random_net(rng, [2, 8, 8, 1])
        out = propagate_box(net, Box.unit(2)).output
        Y = net(rng.uniform(size=(10**6, 2)))
        assert out.lower[0] <= Y.min() and Y.max() <= out.upper[0]

    @pytest.mark.parametrize("act", ["relu", "tanh", "logistic"])
    def test_every_neuron_within_interval(self, rng, act):
        net = random_net(rng, [3, 6, 5, 2], act)
        box = Box([-1, 0, 2], [0.5, 1, 3])
        p = propagate_box(net, box)
        X = rng.uniform(box.lower, box.upper, size=(10**4, 3))
        for l, (Z, H) in enumerate(net.forward_all(X)):
            assert np.all(Z >= p.pre_lower[l]) and np.all(Z <= p.pre_upper[l])
            assert np.all(H >= p.post_lower[l]) and np.all(H <= p.post_upper[l])

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.0, 0.45), st.floats(0.55, 1.0), st.integers(0, 2**31))
    def test_shrinking_box_never_widens(self, lo, hi, seed):
        net = random_net(np.random.default_rng(seed), [2, 5, 5, 1], "tanh")
        big = propagate_box(net, Box.unit(2))
        small = propagate_box(net, Box([lo, lo], [hi, hi]))
        for a, b in zip(small.pre_lower, big.pre_lower):
            assert np.all(a >= b)
        for a, b in zip(small.pre_upper, big.pre_upper):
            assert np.all(a <= b)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            propagate_box(random_net(rng, [2, 3, 1]), Box.unit(3))


class TestDistributions:
    def test_uniform_is_two_kuhn_simplices(self):
        pdf = pdf_as_piecewise_polynomial(UniformBox(Box.unit(2)))
        assert len(pdf) == 2
        assert all(p.is_constant and p.constant_value == 1.0 for p in pdf.polynomials)
        assert pdf.total_mass() == pytest.approx(1.0, abs=1e-12)

    def test_beta_polynomial(self):
        dist = BetaProduct(((2, 2), (3, 2)))
        pdf = pdf_as_piecewise_polynomial(dist)
        p = pdf.polynomials[0]
        assert p.degree == 5
        X = np.random.default_rng(0).uniform(size=(50, 2))
        oracle = 72 * X[:, 0] * X[:, 1] ** 2 * (1 - X[:, 0]) * (1 - X[:, 1])
        np.testing.assert_allclose(p(X), oracle, rtol=1e-12, atol=1e-13)
        np.testing.assert_allclose(dist.pdf(X), stats.beta.pdf(X[:, 0], 2, 2) * stats.beta.pdf(X[:, 1], 3, 2))

    def test_beta_polynomial_integrates_to_one(self):
        pdf = pdf_as_piecewise_polynomial(BetaProduct(((2, 2), (3, 2), (1, 4))))
        total = sum(integrate_polynomial_over_simplex(p.to_rational(), s, exact=True) for s, p in pdf.pieces)
        assert abs(float(total) - 1.0) <= 1e-9

    def test_non_integer_beta_is_not_polynomial(self):
        assert isinstance(pdf_as_piecewise_polynomial(BetaProduct(((2.5, 2),))), NotExactlyPolynomial)

    def test_mixture_is_not_polynomial(self):
        d = TruncatedGaussianMixture([1.0], [[0.5]], [[[0.1]]], Box([0.0], [1.0]))
        assert isinstance(pdf_as_piecewise_polynomial(d), NotExactlyPolynomial)

    def test_mixture_mass_deficit(self):
        d = TruncatedGaussianMixture([0.3, 0.7], [[0.2], [0.6]], [[[0.04]], [[0.09]]], Box([0.0], [1.0]))
        oracle = integrate.quad(lambda x: d.pdf(np.array([[x]]))[0], 0, 1, points=[0.2, 0.6])[0]
        assert d.mass == pytest.approx(oracle, rel=1e-9)
        assert 0 < d.mass_deficit < 0.2

    def test_mixture_mass_2d(self):
        C = np.array([[0.05, 0.01], [0.01, 0.03]])
        d = TruncatedGaussianMixture([1.0], [[0.4, 0.5]], [C], Box.unit(2))
        oracle = integrate.dblquad(lambda y, x: d.pdf(np.array([[x, y]]))[0], 0, 1, 0, 1, epsabs=1e-10)[0]
        assert d.mass == pytest.approx(oracle, abs=1e-6)

    @pytest.mark.parametrize(
        "dist",
        [
            BetaProduct(((2, 2), (3, 2))),
            BetaProduct(((1.5, 3.2),)),
            TruncatedGaussianMixture([0.4, 0.6], [[0.3, 0.3], [0.7, 0.6]], [np.eye(2) * 0.02, [[0.03, 0.01], [0.01, 0.02]]], Box.unit(2)),
        ],
    )
    def test_density_bounds_are_sound(self, dist):
        rng = np.random.default_rng(7)
        n = dist.dim
        lo = rng.uniform(0, 0.9, size=(200, n))
        hi = lo + rng.uniform(0, 0.1, size=(200, n))
        flo, fhi = dist.density_bounds(lo, hi)
        for _ in range(20):
            X = lo + rng.uniform(size=lo.shape) * (hi - lo)
            f = dist.pdf(X)
            assert np.all(flo <= f) and np.all(f <= fhi)

    def test_samples_stay_in_box_or_are_flagged(self):
        d = TruncatedGaussianMixture([1.0], [[0.9]], [[[0.04]]], Box([0.0], [1.0]))
        X = d.sample(np.random.default_rng(0), 10**5)
        ok = np.isfinite(X[:, 0])
        assert np.all((X[ok] >= 0) & (X[ok] <= 1))
        assert (~ok).mean() == pytest.approx(d.mass_deficit, abs=0.01)


class TestSerialization:
    def test_network_round_trip_is_bit_exact(self, rng, tmp_path):
        net = random_net(rng, [2, 7, 3], "tanh")
        save_network(net, tmp_path / "n.json")
        back = load_network(tmp_path / "n.json")
        assert back == net
        for a, b in zip(back.layers, net.layers):
            assert a.weights.tobytes() == b.weights.tobytes()

    def test_two_sixteen_wide_layers(self, rng, tmp_path):
        net = random_net(rng, [2, 16, 16, 1])
        save_network(net, tmp_path / "b.json")
        back = load_network(tmp_path / "b.json")
        assert len(back) == 3 and back.n_inputs == 2 and back.n_outputs == 1

    def test_dimension_mismatch_names_layer(self, tmp_path):
        doc = {"layers": [
            {"weights": np.ones((3, 2)).tolist(), "bias": [0, 0, 0], "activation": "relu"},
            {"weights": np.ones((1, 4)).tolist(), "bias": [0], "activation": "identity"},
        ]}
        (tmp_path / "bad.json").write_text(json.dumps(doc))
        with pytest.raises(DimensionError, match="layer 1"):
            load_network(tmp_path / "bad.json")

    def test_malformed_json(self, tmp_path):
        (tmp_path / "bad.json").write_text("{ not json")
        with pytest.raises(NetworkFormatError):
            load_network(tmp_path / "bad.json")

    def test_unknown_activation(self, tmp_path):
        doc = {"layers": [{"weights": [[1.0]], "bias": [0.0], "activation": "gelu"}]}
        (tmp_path / "bad.json").write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="unknown activation"):
            load_network(tmp_path / "bad.json")

    @pytest.mark.parametrize(
        "dist",
        [
            UniformBox(Box([-1.0, 0.1], [1.0, 0.3])),
            BetaProduct(((2, 2), (3, 2))),
            TruncatedGaussianMixture([0.25, 0.75], [[0.1], [0.7]], [[[0.01]], [[0.2]]], Box([0.0], [1.0])),
        ],
    )
    def test_distribution_round_trip(self, dist, tmp_path):
        save_distribution(dist, tmp_path / "d.json")
        back = load_distribution(tmp_path / "d.json")
        assert back.to_dict() == dist.to_dict()

    def test_explicit_round_trip(self, tmp_path):
        pdf = pdf_as_piecewise_polynomial(BetaProduct(((2, 2), (2, 3))))
        d = ExplicitPiecewisePolynomial(pdf)
        back = distribution_from_dict(json.loads(json.dumps(d.to_dict())))
        X = np.random.default_rng(1).uniform(size=(20, 2))
        np.testing.assert_array_equal(back.pdf(X), d.pdf(X))
