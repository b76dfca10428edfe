from .activations import ActivationKind
from .distributions import (
    BetaProduct,
    ExplicitPiecewisePolynomial,
    InputDistribution,
    NotExactlyPolynomial,
    TruncatedGaussianMixture,
    UniformBox,
    UnsupportedDensityError,
    distribution_from_dict,
    pdf_as_piecewise_polynomial,
)
from .io import (
    NetworkFormatError,
    load_distribution,
    load_network,
    network_from_dict,
    network_to_dict,
    save_distribution,
    save_network,
)
from .network import (
    Box,
    BoxPropagation,
    DimensionError,
    FeedforwardNetwork,
    Interval,
    Layer,
    affine_interval,
    propagate_box,
)
from .piecewise import PiecewisePolynomialPdf
