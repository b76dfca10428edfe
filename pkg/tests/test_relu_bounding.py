import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nncdf.model import ActivationKind, Box, FeedforwardNetwork, Interval
from nncdf.relu_bounding import (
    CONCAVE,
    CONVEX,
    LINEAR,
    PiecewiseLinearScalar,
    bound_activation,
    bound_network,
    chord_bound,
    gadget,
    plan_segments,
    tangent_bound,
    tangent_point,
    to_relu_form,
)

from conftest import random_net

A = ActivationKind
CURVED = [
    (A.TANH, (-2.0, 2.0)),
    (A.LOGISTIC, (-4.0, 1.0)),
    (A.EXP, (-1.0, 2.0)),
    (A.LOG, (0.05, 3.0)),
    (A.SQUARE, (0.0, 2.0)),
]


class TestSegments:
    def test_tanh_splits_at_inflection(self):
        plan = plan_segments(A.TANH, Interval(-2, 2), 3)
        np.testing.assert_allclose(plan.breakpoints, [-2, -4 / 3, -2 / 3, 0, 2 / 3, 4 / 3, 2])
        assert plan.tags == (CONVEX,) * 3 + (CONCAVE,) * 3

    def test_relu_linear_areas_stay_whole(self):
        plan = plan_segments(A.RELU, Interval(-1, 3), 10)
        np.testing.assert_array_equal(plan.breakpoints, [-1, 0, 3])
        assert plan.tags == (LINEAR, LINEAR)

    def test_one_sided_interval(self):
        plan = plan_segments(A.TANH, Interval(0.5, 1.5), 4)
        assert len(plan) == 4 and set(plan.tags) == {CONCAVE}

    def test_rejects_zero_segments(self):
        with pytest.raises(ValueError):
            plan_segments(A.TANH, Interval(0, 1), 0)


class TestSquareOnUnitInterval:
    """Hand-computed values for x^2 on [0, 1]."""

    def test_chord(self):
        pl = chord_bound(A.SQUARE, 0.0, 1.0)
        np.testing.assert_allclose(pl.slopes, [0.5, 1.5])
        relu = to_relu_form(pl)
        # chord through (0, 0), (0.5, 0.25), (1, 1)
        assert relu(0.25) == pytest.approx(0.125)
        assert relu(0.75) == pytest.approx(0.625)
        assert relu.n_units == 2

    def test_tangents_meet_in_the_middle(self):
        assert tangent_point(A.SQUARE, 0.0, 1.0) == pytest.approx(0.5)
        pl = tangent_bound(A.SQUARE, 0.0, 1.0)
        np.testing.assert_allclose(pl.slopes, [0.0, 2.0])
        assert pl(0.75) == pytest.approx(0.5)


class TestPiecewiseLinear:
    def test_extension_outside_range(self):
        pl = PiecewiseLinearScalar.from_values([0, 1, 2], [0, 1, 3])
        np.testing.assert_allclose(pl([-5, 0.5, 1.5, 4]), [0, 0.5, 2, 7])

    def test_slopes_clipped_nonnegative(self):
        pl = PiecewiseLinearScalar.from_values([0, 1, 2], [0, 1, 1 - 1e-17])
        assert np.all(pl.slopes >= 0)

    def test_overflowing_slope_rejected(self):
        with pytest.raises(ValueError, match="slope"):
            PiecewiseLinearScalar.from_values([0.0, 1e-309], [0.0, 1.0])

    def test_xi_signs(self):
        pl = PiecewiseLinearScalar.from_values([0, 1, 2, 3], [0, 2, 3, 5])
        np.testing.assert_array_equal(pl.xi, [1, -1, 1])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(1e-3, 1.0), min_size=1, max_size=8), st.integers(0, 2**31))
    def test_relu_form_reproduces(self, steps, seed):
        x = np.cumsum([0.0] + steps)
        y = np.cumsum(np.random.default_rng(seed).uniform(0, 2, size=len(x)))
        pl = PiecewiseLinearScalar.from_values(x, y)
        assert pl.continuity_defect() <= 1e-12 * (1 + np.abs(y).max())
        t = np.linspace(x[0] - 1, x[-1] + 1, 301)
        np.testing.assert_allclose(to_relu_form(pl)(t), pl(t), atol=1e-9 * (1 + np.abs(y).max()))
        np.testing.assert_allclose(to_relu_form(pl).network()(t[:, None])[:, 0], pl(t), atol=1e-9 * (1 + np.abs(y).max()))


class TestActivationBounds:
    @pytest.mark.parametrize("act,iv", CURVED, ids=[a.value for a, _ in CURVED])
    @pytest.mark.parametrize("n", [1, 2, 5, 10])
    def test_sandwich_and_monotone(self, act, iv, n):
        up, low = bound_activation(act, Interval(*iv), n)
        t = np.linspace(*iv, 20001)
        f = act(t)
        tol = 1e-12 * (1 + np.abs(f))
        assert np.all(low(t) <= f + tol) and np.all(f <= up(t) + tol)
        assert np.all(up.slopes >= 0) and np.all(low.slopes >= 0)
        np.testing.assert_allclose([up(iv[0]), up(iv[1])], act(np.array(iv)), rtol=1e-12)

    @pytest.mark.parametrize("act,iv", CURVED, ids=[a.value for a, _ in CURVED])
    def test_gap_shrinks(self, act, iv):
        t = np.linspace(*iv, 5001)
        gaps = []
        for n in 2 ** np.arange(8):
            up, low = bound_activation(act, Interval(*iv), n)
            gaps.append(np.max(up(t) - low(t)))
        assert np.all(np.diff(gaps) < 0)
        # second-order accuracy: halving the segments cuts the gap by about 4
        assert gaps[-1] < gaps[-2] / 3

    def test_tanh_sup_gap(self):
        t = np.linspace(-2, 2, 40001)
        g5 = np.max(np.subtract(*(b(t) for b in bound_activation(A.TANH, Interval(-2, 2), 5))))
        g10 = np.max(np.subtract(*(b(t) for b in bound_activation(A.TANH, Interval(-2, 2), 10))))
        assert g10 < g5 < 0.02

    def test_relu_is_exact(self):
        up, low = bound_activation(A.RELU, Interval(-1, 2), 5)
        t = np.linspace(-1, 2, 301)
        np.testing.assert_allclose(up(t), np.maximum(t, 0), atol=1e-15)
        np.testing.assert_allclose(low(t), np.maximum(t, 0), atol=1e-15)


class TestBoundNetwork:
    def test_relu_network_is_its_own_bound(self, rng):
        net = random_net(rng, [2, 5, 1])
        pair = bound_network(net, Box.unit(2), 5)
        assert pair.is_exact and pair.upper is net

    @pytest.mark.parametrize("act", ["tanh", "logistic"])
    def test_sandwich_random_net(self, rng, act):
        net = random_net(rng, [2, 6, 6, 2], act)
        box = Box([-1, -1], [1, 1])
        X = rng.uniform(-1, 1, size=(20000, 2))
        prev = None
        for n in (2, 5, 10):
            pair = bound_network(net, box, n)
            assert pair.sandwich_violations(X) == 0
            assert pair.upper.n_outputs == 2
            gap = pair.gap(X).max()
            if prev is not None:
                assert gap < prev
            prev = gap

    def test_negative_weight_wiring(self):
        # y = -tanh(2x) + tanh(-x): needs opposite streams on both terms
        net = FeedforwardNetwork.from_arrays([[[2.0], [-1.0]], [[-1.0, 1.0]]], [[0, 0], [0]], ["tanh", "identity"])
        pair = bound_network(net, Box([-1.0], [1.0]), 3)
        X = np.linspace(-1, 1, 10001)[:, None]
        y = -np.tanh(2 * X) + np.tanh(-X)
        assert np.all(pair.lower(X) <= y + 1e-12) and np.all(y <= pair.upper(X) + 1e-12)
        assert pair.gap(X).max() > 0

    def test_bounding_networks_are_relu(self, rng):
        pair = bound_network(random_net(rng, [2, 4, 1], "tanh"), Box.unit(2), 4)
        assert pair.upper.is_piecewise_linear and pair.lower.is_piecewise_linear
        assert pair.upper.widths == pair.lower.widths


class TestGadgets:
    def test_abs_and_max_exact(self):
        X = np.random.default_rng(0).uniform(-3, 3, size=(1000, 2))
        net, exact = gadget("abs")
        assert exact
        np.testing.assert_allclose(net(X[:, :1])[:, 0], np.abs(X[:, 0]), atol=1e-14)
        net, exact = gadget("max", 2)
        assert exact
        np.testing.assert_allclose(net(X)[:, 0], X.max(axis=1), atol=1e-14)

    @pytest.mark.parametrize(
        "kind,arity,fn,box",
        [
            ("square", 1, lambda X: X[:, 0] ** 2, Box([-2.0], [1.0])),
            ("product", 2, lambda X: X[:, 0] * X[:, 1], Box([-1.0, -2.0], [2.0, 1.0])),
            ("softmax_log", 3, lambda X: X - np.log(np.exp(X).sum(axis=1, keepdims=True)), Box([-1, 0, -2], [1, 2, 0])),
        ],
    )
    def test_relaxed_gadgets(self, kind, arity, fn, box):
        net, exact = gadget(kind, arity)
        assert not exact
        X = np.random.default_rng(1).uniform(box.lower, box.upper, size=(5000, arity))
        np.testing.assert_allclose(net(X).reshape(len(X), -1), fn(X).reshape(len(X), -1), atol=1e-12)
        gaps = []
        for n in (2, 8):
            pair = bound_network(net, box, n)
            assert pair.sandwich_violations(X) == 0
            gaps.append(pair.gap(X).max())
        assert gaps[1] < gaps[0]

    def test_bad_arity(self):
        with pytest.raises(ValueError):
            gadget("product", 3)
        with pytest.raises(ValueError):
            gadget("sigmoid_gate")
