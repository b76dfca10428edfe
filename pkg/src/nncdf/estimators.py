"""scikit-learn style front end.

``fit`` takes a network and an input distribution; ``predict`` and
``transform`` take output thresholds ``y``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .bounds_engine import DEFAULT_GRID_SIZE, BoundsProblem, default_grid, mc_cdf, prepare_bounds
from .exact_cdf import CdfIntegrator
from .model.distributions import InputDistribution, NotExactlyPolynomial, pdf_as_piecewise_polynomial
from .model.network import FeedforwardNetwork
from .pdf_bounds import DEFAULT_VERTEX_BUDGET
from .regions import UnsupportedNetworkError, enumerate_cells


def check_thresholds(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim == 2 and y.shape[1] == 1:
        y = y[:, 0]
    if y.ndim == 0:
        y = y[None]
    if y.ndim != 1:
        raise ValueError(f"expected a 1-d array of thresholds, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("thresholds must be finite")
    return y


def check_problem(network, distribution) -> tuple[FeedforwardNetwork, InputDistribution]:
    if not isinstance(network, FeedforwardNetwork):
        raise TypeError("network must be a FeedforwardNetwork")
    if not isinstance(distribution, InputDistribution):
        raise TypeError("distribution must be an InputDistribution")
    if distribution.dim != network.n_inputs:
        raise ValueError(f"distribution has dimension {distribution.dim}, network expects {network.n_inputs}")
    return network, distribution


class ExactCdf(BaseEstimator, TransformerMixin):
    """Exact cdf of one output of a ReLU network under a polynomial density."""

    def __init__(self, component: int = 0, max_cells: int = 10**6):
        self.component = component
        self.max_cells = max_cells

    def fit(self, network, distribution):
        net, dist = check_problem(network, distribution)
        if not net.is_piecewise_linear:
            raise UnsupportedNetworkError("exact cdf needs a ReLU/identity network")
        pdf = pdf_as_piecewise_polynomial(dist)
        if isinstance(pdf, NotExactlyPolynomial):
            raise ValueError(f"density is not exactly polynomial: {pdf.reason}")
        self.cells_ = enumerate_cells(net, dist.box, self.max_cells)
        self.integrator_ = CdfIntegrator(self.cells_, pdf, self.component)
        self.grid_ = default_grid(net.select_output(self.component), dist, DEFAULT_GRID_SIZE)
        return self

    def predict(self, y) -> np.ndarray:
        check_is_fitted(self, "integrator_")
        return np.array([self.integrator_(v) for v in check_thresholds(y)])

    def transform(self, y) -> np.ndarray:
        return self.predict(y)[:, None]


class CdfBoundsEstimator(BaseEstimator, TransformerMixin):
    """Guaranteed lower/upper cdf of one network output."""

    def __init__(
        self,
        n_per_region: int = 5,
        vertex_budget: int = DEFAULT_VERTEX_BUDGET,
        component: int = 0,
        cells_per_axis: int | None = None,
        max_cells: int = 10**6,
    ):
        self.n_per_region = n_per_region
        self.vertex_budget = vertex_budget
        self.component = component
        self.cells_per_axis = cells_per_axis
        self.max_cells = max_cells

    def fit(self, network, distribution):
        net, dist = check_problem(network, distribution)
        if self.n_per_region < 1:
            raise ValueError("n_per_region must be >= 1")
        self.problem_: BoundsProblem = prepare_bounds(
            net, dist, self.n_per_region, self.vertex_budget, self.component, self.cells_per_axis, self.max_cells
        )
        self.grid_ = default_grid(self.problem_.source, dist)
        self.network_ = net
        self.distribution_ = dist
        return self

    def bounds(self, y=None):
        check_is_fitted(self, "problem_")
        return self.problem_.evaluate(self.grid_ if y is None else check_thresholds(y))

    def predict(self, y) -> np.ndarray:
        """Midpoint of the bounds (a point estimate of the cdf)."""
        b = self.transform(y)
        return 0.5 * (b[:, 0] + b[:, 1])

    def transform(self, y) -> np.ndarray:
        """``(n, 2)`` array of ``[lower, upper]`` in the order of ``y``."""
        check_is_fitted(self, "problem_")
        y = check_thresholds(y)
        order = np.argsort(y, kind="stable")
        b = self.problem_.evaluate(y[order])
        out = np.empty((len(y), 2))
        out[order, 0] = b.lower
        out[order, 1] = b.upper
        return out

    def monte_carlo(self, y, n_samples: int = 100_000, seed: int = 0) -> np.ndarray:
        check_is_fitted(self, "problem_")
        emp = mc_cdf(self.network_, self.distribution_, n_samples, seed, self.component)
        return emp(check_thresholds(y))
