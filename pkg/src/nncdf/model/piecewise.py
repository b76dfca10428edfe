from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import Polynomial, Simplex, integrate_simplices
from .network import Box, DimensionError


@dataclass(frozen=True, eq=False)
class PiecewisePolynomialPdf:
    """Density given by one polynomial per simplex of a partition of ``support``."""

    simplices: np.ndarray  # (m, n+1, n)
    polynomials: tuple  # one Polynomial per simplex
    support: Box

    def __post_init__(self):
        S = np.array(self.simplices, dtype=float)
        if S.ndim != 3 or S.shape[1] != S.shape[2] + 1:
            raise DimensionError("simplices must have shape (m, n+1, n)")
        polys = tuple(self.polynomials)
        if len(polys) != len(S):
            raise ValueError("need exactly one polynomial per simplex")
        if S.shape[2] != self.support.dim or any(p.dim != self.support.dim for p in polys):
            raise DimensionError("pieces and support dimensions differ")
        S.setflags(write=False)
        object.__setattr__(self, "simplices", S)
        object.__setattr__(self, "polynomials", polys)

    @classmethod
    def from_pieces(cls, pieces, support: Box) -> PiecewisePolynomialPdf:
        pieces = list(pieces)
        S = np.stack([(s.vertices if isinstance(s, Simplex) else np.asarray(s, float)) for s, _ in pieces])
        return cls(S, tuple(p for _, p in pieces), support)

    @property
    def dim(self) -> int:
        return self.support.dim

    @property
    def pieces(self) -> list[tuple[Simplex, Polynomial]]:
        return [(Simplex(s), p) for s, p in zip(self.simplices, self.polynomials)]

    def __len__(self) -> int:
        return len(self.polynomials)

    def piece_integrals(self) -> np.ndarray:
        return np.array([integrate_simplices(p, s[None])[0] for s, p in zip(self.simplices, self.polynomials)])

    def total_mass(self) -> float:
        return float(np.sum(self.piece_integrals()))

    def __call__(self, X) -> np.ndarray:
        """Density at points; on shared faces the first matching piece wins."""
        from ..geometry import simplex_halfspaces

        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros(len(X))
        done = np.zeros(len(X), dtype=bool)
        for S, p in zip(self.simplices, self.polynomials):
            A, b = simplex_halfspaces(S)
            inside = ~done & np.all(X @ A.T <= b + 1e-12, axis=1)
            if inside.any():
                out[inside] = p(X[inside])
                done |= inside
        return out

    def refine(self) -> PiecewisePolynomialPdf:
        """Split every simplex at its longest edge midpoint (same density)."""
        from ..pdf_bounds import bisect_simplices

        S = self.simplices
        children = bisect_simplices(S)
        polys = tuple(p for p in self.polynomials for _ in range(2))
        return PiecewisePolynomialPdf(children, polys, self.support)
