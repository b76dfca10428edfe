"""Input distributions supported on a compact box."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats

from ..geometry import Polynomial, kuhn_triangulation
from .network import Box, DimensionError
from .piecewise import PiecewisePolynomialPdf


class UnsupportedDensityError(ValueError):
    pass


class NotExactlyPolynomial:
    """Marker returned when a density has no exact piecewise-polynomial form."""

    def __init__(self, reason: str = ""):
        self.reason = reason

    def __bool__(self):
        return False

    def __repr__(self):
        return f"NotExactlyPolynomial({self.reason!r})"


class InputDistribution:
    kind: str
    box: Box

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def mass(self) -> float:
        """Probability mass inside ``box``."""
        return 1.0

    @property
    def mass_deficit(self) -> float:
        return 1.0 - self.mass

    def pdf(self, X) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` draws; draws outside ``box`` (truncation loss) come back as NaN rows."""
        raise NotImplementedError

    def density_bounds(self, lower: np.ndarray, upper: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Guaranteed ``(lo, hi)`` of the density over each box ``[lower[i], upper[i]]``."""
        raise UnsupportedDensityError(f"no density bounds for {self.kind}")

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class UniformBox(InputDistribution):
    box: Box
    kind: str = field(default="uniform", init=False)

    def pdf(self, X):
        X = np.atleast_2d(X)
        return np.where(self.box.contains(X), 1.0 / self.box.volume, 0.0)

    def sample(self, rng, n):
        return rng.uniform(self.box.lower, self.box.upper, size=(n, self.dim))

    def density_bounds(self, lower, upper):
        c = np.full(len(lower), 1.0 / self.box.volume)
        return c, c.copy()

    def to_dict(self):
        return {"kind": self.kind, "box": _box_dict(self.box)}


@dataclass(frozen=True, eq=False)
class BetaProduct(InputDistribution):
    """Independent Beta marginals on the unit cube."""

    shapes: tuple
    box: Box = field(init=False)
    kind: str = field(default="beta_product", init=False)

    def __post_init__(self):
        shapes = tuple((float(a), float(b)) for a, b in self.shapes)
        if not shapes or any(a <= 0 or b <= 0 for a, b in shapes):
            raise ValueError("Beta shape parameters must be positive")
        object.__setattr__(self, "shapes", shapes)
        object.__setattr__(self, "box", Box.unit(len(shapes)))

    def pdf(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.ones(len(X))
        for k, (a, b) in enumerate(self.shapes):
            out = out * stats.beta.pdf(X[:, k], a, b)
        return np.where(self.box.contains(X), out, 0.0)

    def sample(self, rng, n):
        return np.column_stack([rng.beta(a, b, size=n) for a, b in self.shapes])

    @property
    def is_polynomial(self) -> bool:
        return all(a.is_integer() and b.is_integer() for a, b in self.shapes)

    def polynomial(self) -> Polynomial:
        n = self.dim
        out = Polynomial.constant(1.0, n)
        for k, (a, b) in enumerate(self.shapes):
            a, b = int(a), int(b)
            norm = Fraction(math.factorial(a + b - 1), math.factorial(a - 1) * math.factorial(b - 1))
            # x^(a-1) (1-x)^(b-1) expanded binomially
            coeffs = [0] * (a + b - 1)
            for j in range(b):
                coeffs[a - 1 + j] = float(norm * math.comb(b - 1, j) * (-1) ** j)
            out = out * Polynomial.from_univariate(coeffs, k, n)
        return out

    def density_bounds(self, lower, upper):
        lower = np.atleast_2d(lower)
        upper = np.atleast_2d(upper)
        lo = np.ones(len(lower))
        hi = np.ones(len(lower))
        for k, (a, b) in enumerate(self.shapes):
            if a < 1 or b < 1:
                raise UnsupportedDensityError("Beta density with a shape below 1 is unbounded")
            flo, fhi = _unimodal_range(
                lambda x, a=a, b=b: stats.beta.pdf(x, a, b),
                _beta_mode(a, b),
                np.clip(lower[:, k], 0, 1),
                np.clip(upper[:, k], 0, 1),
            )
            lo, hi = lo * flo, hi * fhi
        return _outward(lo, hi)

    def to_dict(self):
        return {"kind": self.kind, "shapes": [list(s) for s in self.shapes], "box": _box_dict(self.box)}


def _beta_mode(a: float, b: float) -> float:
    if a == 1 and b == 1:
        return 0.5
    return (a - 1) / (a + b - 2)


def _unimodal_range(f, mode, lo, hi):
    """Exact range of a unimodal function over intervals ``[lo, hi]``."""
    flo, fhi = f(lo), f(hi)
    vmin = np.minimum(flo, fhi)
    vmax = np.maximum(flo, fhi)
    inside = (lo <= mode) & (mode <= hi)
    vmax = np.where(inside, f(np.full_like(lo, mode)), vmax)
    return vmin, vmax


def _outward(lo, hi, rel: float = 1e-12):
    return np.maximum(lo * (1 - rel), 0.0), hi * (1 + rel)


@dataclass(frozen=True, eq=False)
class TruncatedGaussianMixture(InputDistribution):
    """Gaussian mixture restricted to ``box`` without renormalisation.

    The mass that falls outside the box is reported as ``mass_deficit``.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    box: Box
    kind: str = field(default="gaussian_mixture", init=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        cov = np.asarray(self.covariances, dtype=float)
        if cov.ndim == 2:
            cov = cov[None]
        n = self.box.dim
        if mu.shape != (len(w), n) or cov.shape != (len(w), n, n):
            raise DimensionError("mixture parameters do not match the box dimension")
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0):
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        for C in cov:
            if not np.allclose(C, C.T) or np.any(np.linalg.eigvalsh(C) <= 0):
                raise ValueError("covariances must be symmetric positive definite")
        for name, arr in (("weights", w), ("means", mu), ("covariances", cov)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_prec", np.linalg.inv(cov))
        object.__setattr__(self, "_norm", 1.0 / np.sqrt((2 * np.pi) ** n * np.linalg.det(cov)))

    @property
    def mass(self) -> float:
        total = 0.0
        for w, m, C in zip(self.weights, self.means, self.covariances):
            if self.dim == 1:
                s = math.sqrt(C[0, 0])
                p = stats.norm.cdf(self.box.upper[0], m[0], s) - stats.norm.cdf(self.box.lower[0], m[0], s)
            else:
                p = stats.multivariate_normal(m, C).cdf(self.box.upper, lower_limit=self.box.lower)
            total += w * p
        return float(total)

    def _unclipped_pdf(self, X):
        out = np.zeros(len(X))
        for w, m, P, c in zip(self.weights, self.means, self._prec, self._norm):
            D = X - m
            q = np.einsum("ij,jk,ik->i", D, P, D)
            out += w * c * np.exp(-0.5 * q)
        return out

    def pdf(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.where(self.box.contains(X), self._unclipped_pdf(X), 0.0)

    def sample(self, rng, n):
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        X = np.empty((n, self.dim))
        for k in range(len(self.weights)):
            sel = comp == k
            X[sel] = rng.multivariate_normal(self.means[k], self.covariances[k], size=int(sel.sum()))
        X[~self.box.contains(X)] = np.nan
        return X

    def density_bounds(self, lower, upper):
        lower = np.atleast_2d(lower)
        upper = np.atleast_2d(upper)
        lo = np.zeros(len(lower))
        hi = np.zeros(len(lower))
        for w, m, P, c in zip(self.weights, self.means, self._prec, self._norm):
            qlo, qhi = _quadratic_form_range(P, lower - m, upper - m)
            lo += w * c * np.exp(-0.5 * qhi)
            hi += w * c * np.exp(-0.5 * qlo)
        return _outward(lo, hi)

    def to_dict(self):
        return {
            "kind": self.kind,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "box": _box_dict(self.box),
        }


def _square_range(lo, hi):
    sq_lo = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(lo * lo, hi * hi))
    return sq_lo, np.maximum(lo * lo, hi * hi)


def _product_range(alo, ahi, blo, bhi):
    c = np.stack([alo * blo, alo * bhi, ahi * blo, ahi * bhi])
    return c.min(axis=0), c.max(axis=0)


def _quadratic_form_range(P, dlo, dhi):
    """Interval enclosure of ``d^T P d`` for ``d`` in boxes ``[dlo, dhi]``.

    Diagonal terms use the exact square range, so for diagonal ``P`` the
    enclosure is exact.
    """
    n = P.shape[0]
    qlo = np.zeros(len(dlo))
    qhi = np.zeros(len(dlo))
    for i in range(n):
        slo, shi = _square_range(dlo[:, i], dhi[:, i])
        qlo += P[i, i] * slo if P[i, i] >= 0 else P[i, i] * shi
        qhi += P[i, i] * shi if P[i, i] >= 0 else P[i, i] * slo
        for j in range(i + 1, n):
            if P[i, j] == 0:
                continue
            plo, phi = _product_range(dlo[:, i], dhi[:, i], dlo[:, j], dhi[:, j])
            c = 2 * P[i, j]
            qlo += np.minimum(c * plo, c * phi)
            qhi += np.maximum(c * plo, c * phi)
    return np.maximum(qlo, 0.0), qhi


@dataclass(frozen=True, eq=False)
class ExplicitPiecewisePolynomial(InputDistribution):
    density: PiecewisePolynomialPdf
    box: Box = field(init=False)
    kind: str = field(default="explicit", init=False)

    def __post_init__(self):
        object.__setattr__(self, "box", self.density.support)

    @property
    def mass(self) -> float:
        return self.density.total_mass()

    def pdf(self, X):
        return self.density(X)

    def sample(self, rng, n):
        raise UnsupportedDensityError("sampling from an explicit piecewise polynomial is not supported")

    def to_dict(self):
        pieces = []
        for S, p in zip(self.density.simplices, self.density.polynomials):
            pieces.append(
                {
                    "vertices": S.tolist(),
                    "terms": [{"exponents": list(k), "coef": float(v)} for k, v in sorted(p.terms.items())],
                }
            )
        return {"kind": self.kind, "pieces": pieces, "box": _box_dict(self.box)}


def pdf_as_piecewise_polynomial(dist: InputDistribution) -> PiecewisePolynomialPdf | NotExactlyPolynomial:
    if isinstance(dist, ExplicitPiecewisePolynomial):
        return dist.density
    if isinstance(dist, UniformBox):
        S = kuhn_triangulation(dist.box, 1)
        p = Polynomial.constant(1.0 / dist.box.volume, dist.dim)
        return PiecewisePolynomialPdf(S, (p,) * len(S), dist.box)
    if isinstance(dist, BetaProduct):
        if not dist.is_polynomial:
            return NotExactlyPolynomial("Beta shapes are not all integers")
        S = kuhn_triangulation(dist.box, 1)
        p = dist.polynomial()
        return PiecewisePolynomialPdf(S, (p,) * len(S), dist.box)
    return NotExactlyPolynomial(f"{dist.kind} density is not a piecewise polynomial")


def _box_dict(box: Box) -> dict:
    return {"lower": box.lower.tolist(), "upper": box.upper.tolist()}


def box_from_dict(d) -> Box:
    return Box(d["lower"], d["upper"])


def distribution_from_dict(d: dict) -> InputDistribution:
    kind = d.get("kind")
    if kind == "uniform":
        return UniformBox(box_from_dict(d["box"]))
    if kind == "beta_product":
        dist = BetaProduct(tuple(tuple(s) for s in d["shapes"]))
        if "box" in d and box_from_dict(d["box"]) != dist.box:
            raise ValueError("beta_product is defined on the unit cube only")
        return dist
    if kind == "gaussian_mixture":
        return TruncatedGaussianMixture(d["weights"], d["means"], d["covariances"], box_from_dict(d["box"]))
    if kind == "explicit":
        box = box_from_dict(d["box"])
        S, polys = [], []
        for piece in d["pieces"]:
            S.append(piece["vertices"])
            polys.append(Polynomial({tuple(t["exponents"]): float(t["coef"]) for t in piece["terms"]}, box.dim))
        return ExplicitPiecewisePolynomial(PiecewisePolynomialPdf(np.array(S, dtype=float), tuple(polys), box))
    raise ValueError(f"unknown distribution kind {kind!r}")
