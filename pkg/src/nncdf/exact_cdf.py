"""Exact cdf of a piecewise-linear network under a piecewise-polynomial pdf.

Every activation cell is intersected with every pdf simplex; the
intersections are triangulated once.  For a threshold ``y`` a simplex
lies fully below, fully above, or is cut by the hyperplane
``g(x) = y`` where ``g`` is the local affine output.  Cut simplices are
integrated over the part below the hyperplane (or as full minus the
part above when that part is a simplex).
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .geometry import (
    Polynomial,
    clip_piece,
    integrate_simplices,
    piece_simplices,
    simplex_halfspaces,
    triangulate_array,
)
from .model.network import DimensionError
from .model.piecewise import PiecewisePolynomialPdf
from .regions import CellCollection

__all__ = [
    "CdfIntegrator",
    "PiecewisePolynomialPdf",
    "QueryPoint",
    "SupportMismatchError",
    "exact_cdf_at",
    "exact_cdf_curve",
]


class SupportMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class QueryPoint:
    y: np.ndarray

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if y.ndim != 1 or not np.all(np.isfinite(y)):
            raise ValueError("query point must be a finite vector")
        object.__setattr__(self, "y", y)

    @property
    def dim(self) -> int:
        return len(self.y)


class _SpatialIndex:
    """Bounding-box buckets over a uniform grid, for cell/simplex pairing."""

    def __init__(self, S: np.ndarray, lower, upper):
        m, _, n = S.shape
        self.lower = np.asarray(lower, float)
        width = np.asarray(upper, float) - self.lower
        self.res = max(1, int(round((m / math.factorial(n)) ** (1.0 / n))))
        self.width = np.where(width > 0, width, 1.0)
        self.buckets = defaultdict(list)
        lo = self._cell(S.min(axis=1))
        hi = self._cell(S.max(axis=1))
        for i in range(m):
            for key in np.ndindex(*(hi[i] - lo[i] + 1)):
                self.buckets[tuple(lo[i] + key)].append(i)

    def _cell(self, P):
        k = np.floor((P - self.lower) / self.width * self.res).astype(int)
        return np.clip(k, 0, self.res - 1)

    def query(self, pmin, pmax) -> list[int]:
        lo, hi = self._cell(pmin[None])[0], self._cell(pmax[None])[0]
        out = set()
        for key in np.ndindex(*(hi - lo + 1)):
            out.update(self.buckets.get(tuple(lo + key), ()))
        return sorted(out)


def _pieces(cells: CellCollection, pdf: PiecewisePolynomialPdf):
    """Yield ``(vertices, cell index, pdf simplex index)`` for overlapping pairs."""
    if cells.box != pdf.support:
        raise SupportMismatchError("pdf support must equal the analysis box of the cells")
    S = pdf.simplices
    halfspaces = [simplex_halfspaces(s) for s in S]
    if len(S) <= 4:
        candidates = lambda V: range(len(S))  # noqa: E731
    else:
        index = _SpatialIndex(S, pdf.support.lower, pdf.support.upper)
        candidates = lambda V: index.query(V.min(axis=0), V.max(axis=0))  # noqa: E731
    for ci, cell in enumerate(cells):
        V = cell.vertices
        for si in candidates(V):
            A, b = halfspaces[si]
            W = clip_piece(V, A, b)
            if W is not None:
                yield W, ci, si


class CdfIntegrator:
    """Precomputed triangulation for repeated cdf queries.

    ``component`` selects one output; ``None`` keeps all outputs, which
    makes queries multivariate (joint cdf).
    """

    def __init__(self, cells: CellCollection, pdf: PiecewisePolynomialPdf, component: int | None = None):
        n_out = cells.net.n_outputs
        if component is not None and not 0 <= component < n_out:
            raise IndexError(f"output component {component} out of range for {n_out} outputs")
        if n_out == 1 and component is None:
            component = 0
        self.component = component
        self.n_outputs = n_out
        self.dim = pdf.dim
        # polynomial groups: constants share the unit polynomial
        self._polys: list[Polynomial] = []
        group_of: dict = {}
        weights_of = []
        for p in pdf.polynomials:
            if p.is_constant:
                key, w, base = ("const",), float(p.constant_value), Polynomial.constant(1.0, pdf.dim)
            else:
                key, w, base = p.key(), 1.0, p
            if key not in group_of:
                group_of[key] = len(self._polys)
                self._polys.append(base)
            weights_of.append((group_of[key], w))
        simp, grp, wts, cell_of = [], [], [], []
        self._general = []  # multivariate path keeps whole pieces
        for W, ci, si in _pieces(cells, pdf):
            g, w = weights_of[si]
            if w == 0.0:
                continue
            if component is None:
                self._general.append((W, ci, g, w))
                continue
            T = piece_simplices(W)
            simp.append(T)
            grp += [g] * len(T)
            wts += [w] * len(T)
            cell_of += [ci] * len(T)
        self.cells = cells
        n = self.dim
        self.S = np.concatenate(simp) if simp else np.zeros((0, n + 1, n))
        self.group = np.array(grp, dtype=int)
        self.weight = np.array(wts, dtype=float)
        if component is None:
            return
        # output values at simplex vertices
        V = np.stack([c.map.V[component] for c in cells]) if len(cells) else np.zeros((0, n))
        c = np.array([c.map.c[component] for c in cells])
        cell_of = np.array(cell_of, dtype=int)
        self.G = np.einsum("mvn,mn->mv", self.S, V[cell_of]) + c[cell_of][:, None] if len(cell_of) else np.zeros((0, n + 1))
        self.gmin = self.G.min(axis=1)
        self.gmax = self.G.max(axis=1)
        self.full = self._integrate_at(self.S, np.arange(len(self.S)))
        order = np.argsort(self.gmax, kind="stable")
        self._gmax_sorted = self.gmax[order]
        self._cum = np.concatenate([[0.0], np.cumsum(self.full[order])])
        self.total_mass = float(self._cum[-1])

    # -- scalar queries

    def _partial(self, y: float) -> float:
        cut = np.nonzero((self.gmin < y) & (self.gmax > y))[0]
        if not len(cut):
            return 0.0
        n = self.dim
        S, G = self.S[cut], self.G[cut]
        below = G <= y
        k = below.sum(axis=1)
        parts = np.zeros(len(cut))
        # one vertex below: the region is a corner simplex
        m1 = k == 1
        if m1.any():
            parts[m1] = self._corner(S[m1], G[m1], y, below[m1], cut[m1])
        # one vertex above: full minus the corner simplex above
        mn = (k == n) & ~m1
        if mn.any():
            parts[mn] = self.full[cut[mn]] - self._corner(S[mn], G[mn], y, ~below[mn], cut[mn])
        rest = np.nonzero(~m1 & ~mn)[0]
        for r in rest:
            parts[r] = self._general_part(S[r], G[r], y, cut[r])
        return float(np.sum(parts))

    def _corner(self, S, G, y, apex_mask, idx):
        """Integral over the simplex spanned by the apex and its edge crossings."""
        m, nv, _ = S.shape
        rows = np.arange(m)
        apex = np.argmax(apex_mask, axis=1)
        allv = np.arange(nv)
        others = np.sort(np.where(allv[None] == apex[:, None], nv, allv[None]), axis=1)[:, :-1]
        P0, g0 = S[rows, apex], G[rows, apex]
        Pv, gv = S[rows[:, None], others], G[rows[:, None], others]
        t = (y - g0[:, None]) / (gv - g0[:, None])
        sub = np.concatenate([P0[:, None], P0[:, None] + t[..., None] * (Pv - P0[:, None])], axis=1)
        return self._integrate_at(sub, idx)

    def _general_part(self, S, G, y, i) -> float:
        below = G <= y
        pts = [S[below]]
        for a in np.nonzero(below)[0]:
            for b in np.nonzero(~below)[0]:
                t = (y - G[a]) / (G[b] - G[a])
                pts.append((S[a] + t * (S[b] - S[a]))[None])
        T = triangulate_array(np.vstack(pts))
        if not len(T):
            return 0.0
        idx = np.full(len(T), i)
        return float(np.sum(self._integrate_at(T, idx)))

    def _integrate_at(self, T, idx):
        out = np.zeros(len(T))
        g = self.group[idx]
        for k, p in enumerate(self._polys):
            sel = g == k
            if sel.any():
                out[sel] = integrate_simplices(p, T[sel]) * self.weight[idx[sel]]
        return out

    def raw_scalar(self, y: float) -> float:
        y = float(y)
        n_full = int(np.searchsorted(self._gmax_sorted, y, side="right"))
        return float(self._cum[n_full]) + self._partial(y)

    # -- joint queries

    def raw_joint(self, y: np.ndarray) -> float:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n_outputs,):
            raise DimensionError(f"query has {y.size} components, network has {self.n_outputs} outputs")
        total = []
        for W, ci, g, w in self._general:
            m = self.cells[ci].map
            P = clip_piece(W, m.V, y - m.c)
            if P is None:
                continue
            T = piece_simplices(P)
            if len(T):
                total.append(w * float(np.sum(integrate_simplices(self._polys[g], T))))
        return math.fsum(total)

    def raw(self, y) -> float:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if self.component is None:
            return self.raw_joint(y)
        if y.size != 1:
            raise DimensionError(f"query has {y.size} components, expected a scalar")
        return self.raw_scalar(y[0])

    def __call__(self, y) -> float:
        return float(min(1.0, max(0.0, self.raw(y))))


def _as_query(y) -> np.ndarray:
    return y.y if isinstance(y, QueryPoint) else np.atleast_1d(np.asarray(y, dtype=float))


def exact_cdf_at(cells: CellCollection, pdf: PiecewisePolynomialPdf, y, component: int | None = None) -> float:
    """``P(net(X) <= y)``, clamped to ``[0, 1]``."""
    return CdfIntegrator(cells, pdf, component)(_as_query(y))


def exact_cdf_curve(cells: CellCollection, pdf: PiecewisePolynomialPdf, grid, component: int | None = None, raw: bool = False):
    """``[(y, F(y)), ...]`` in grid order; ``raw=True`` skips the clamp."""
    integ = CdfIntegrator(cells, pdf, component)
    out = []
    for y in grid:
        q = _as_query(y)
        v = integ.raw(q) if raw else integ(q)
        out.append((q[0] if q.size == 1 else q, v))
    return out
