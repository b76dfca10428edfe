import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from nncdf.estimators import CdfBoundsEstimator, ExactCdf, check_thresholds
from nncdf.model import BetaProduct, Box, TruncatedGaussianMixture, UniformBox
from nncdf.regions import UnsupportedNetworkError

from conftest import identity_net, random_net


class TestExactCdf:
    def test_identity_uniform(self):
        est = ExactCdf().fit(identity_net(), UniformBox(Box([0.0], [1.0])))
        np.testing.assert_allclose(est.predict([0.25, 0.5, 2.0]), [0.25, 0.5, 1.0])
        assert est.transform([[0.1], [0.2]]).shape == (2, 1)

    def test_rejects_tanh(self):
        with pytest.raises(UnsupportedNetworkError):
            ExactCdf().fit(random_net(np.random.default_rng(0), [1, 3, 1], "tanh"), UniformBox(Box([0.0], [1.0])))

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            ExactCdf().predict([0.0])

    def test_params_clone(self):
        est = ExactCdf(component=1, max_cells=10)
        assert clone(est).get_params() == {"component": 1, "max_cells": 10}


@pytest.fixture(scope="module")
def fitted():
    net = random_net(np.random.default_rng(1), [2, 5, 1], "tanh")
    return CdfBoundsEstimator(n_per_region=3).fit(net, BetaProduct(((2, 2), (2, 2))))


class TestBoundsEstimator:

    def test_transform_keeps_input_order(self, fitted):
        y = np.array([0.4, -0.3, 0.1])
        b = fitted.transform(y)
        assert np.all(b[:, 0] <= b[:, 1])
        assert b[1, 0] <= b[2, 0] <= b[0, 0]
        np.testing.assert_allclose(fitted.predict(y), b.mean(axis=1))
        sorted_b = fitted.bounds(np.sort(y))
        np.testing.assert_array_equal(b[[1, 2, 0], 0], sorted_b.lower)

    def test_monte_carlo_inside(self, fitted):
        y = fitted.grid_[::50]
        b = fitted.transform(y)
        mc = fitted.monte_carlo(y, 100_000, seed=2)
        eps = np.sqrt(np.log(2 / 0.001) / 2e5)
        assert np.all(b[:, 0] - eps <= mc) and np.all(mc <= b[:, 1] + eps)

    def test_mixture_input(self):
        d = TruncatedGaussianMixture([1.0], [[0.5]], [[[0.04]]], Box([0.0], [1.0]))
        est = CdfBoundsEstimator(cells_per_axis=50).fit(identity_net(), d)
        b = est.transform([0.5])
        assert b[0, 0] <= 0.5 * d.mass <= b[0, 1]

    def test_bad_params(self):
        with pytest.raises(ValueError):
            CdfBoundsEstimator(n_per_region=0).fit(identity_net(), UniformBox(Box([0.0], [1.0])))
        with pytest.raises(TypeError):
            CdfBoundsEstimator().fit("net", UniformBox(Box([0.0], [1.0])))


def test_check_thresholds():
    np.testing.assert_array_equal(check_thresholds(0.5), [0.5])
    with pytest.raises(ValueError):
        check_thresholds([[1.0, 2.0]])
    with pytest.raises(ValueError):
        check_thresholds([np.inf])
