"""Exact and guaranteed-bound cdfs of neural network outputs under random inputs."""

from .bounds_engine import CdfBounds, EmpiricalCdf, cdf_bounds, mc_cdf, oob_tally, prepare_bounds
from .estimators import CdfBoundsEstimator, ExactCdf
from .exact_cdf import CdfIntegrator, QueryPoint, exact_cdf_at, exact_cdf_curve
from .model import (
    ActivationKind,
    BetaProduct,
    Box,
    ExplicitPiecewisePolynomial,
    FeedforwardNetwork,
    Interval,
    Layer,
    PiecewisePolynomialPdf,
    TruncatedGaussianMixture,
    UniformBox,
    load_distribution,
    load_network,
    pdf_as_piecewise_polynomial,
    propagate_box,
    save_distribution,
    save_network,
)
from .pdf_bounds import bound_pdf, partition_box, refine
from .regions import BudgetError, enumerate_cells
from .relu_bounding import bound_activation, bound_network, gadget

__version__ = "0.1.0"
