"""Piecewise-constant upper and lower bounds of an input density."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Polynomial, kuhn_triangulation
from .model.distributions import InputDistribution
from .model.network import Box
from .model.piecewise import PiecewisePolynomialPdf
from .regions import BudgetError

DEFAULT_VERTEX_BUDGET = 50_000



def simplex_volumes(S: np.ndarray) -> np.ndarray:
    n = S.shape[-1]
    return np.abs(np.linalg.det(S[:, 1:] - S[:, :1])) / math.factorial(n)


@dataclass(frozen=True, eq=False)
class SimplicialPartition:
    simplices: np.ndarray
    vertex_count: int
    box: Box

    @property
    def volumes(self) -> np.ndarray:
        return simplex_volumes(self.simplices)

    def __len__(self):
        return len(self.simplices)


def max_cells_per_axis(dim: int, budget: int = DEFAULT_VERTEX_BUDGET) -> int:
    """Largest ``k`` with ``(k + 1) ** dim <= budget``."""
    k = int(round(budget ** (1.0 / dim))) + 1
    while (k + 1) ** dim > budget:
        k -= 1
    if k < 1:
        raise BudgetError(f"vertex budget {budget} cannot hold a single grid cell in {dim}D")
    return k


def partition_box(box: Box, cells_per_axis: int, budget: int = DEFAULT_VERTEX_BUDGET) -> SimplicialPartition:
    k = int(cells_per_axis)
    if k < 1:
        raise ValueError("cells_per_axis must be >= 1")
    nv = (k + 1) ** box.dim
    if nv > budget:
        raise BudgetError(f"{k} cells per axis need {nv} vertices, budget is {budget}")
    return SimplicialPartition(kuhn_triangulation(box, k), nv, box)


def bisect_simplices(S: np.ndarray) -> np.ndarray:
    """Split each simplex at the midpoint of its longest edge.

    Children of simplex ``i`` are rows ``2i`` and ``2i + 1``.
    """
    S = np.asarray(S, dtype=float)
    m, nv, n = S.shape
    ii, jj = np.triu_indices(nv, k=1)
    lengths = np.sum((S[:, ii] - S[:, jj]) ** 2, axis=-1)
    e = np.argmax(lengths, axis=1)  # first longest edge
    a, b = ii[e], jj[e]
    rows = np.arange(m)
    mid = 0.5 * (S[rows, a] + S[rows, b])
    out = np.repeat(S, 2, axis=0)
    out[2 * rows, b] = mid
    out[2 * rows + 1, a] = mid
    return out


@dataclass(frozen=True, eq=False)
class PdfBoundsPair:
    partition: SimplicialPartition
    lo: np.ndarray
    hi: np.ndarray
    source: InputDistribution | None = None

    def _pdf(self, values) -> PiecewisePolynomialPdf:
        n = self.partition.box.dim
        polys = tuple(Polynomial.constant(float(v), n) for v in values)
        return PiecewisePolynomialPdf(self.partition.simplices, polys, self.partition.box)

    def upper_pdf(self) -> PiecewisePolynomialPdf:
        return self._pdf(self.hi)

    def lower_pdf(self) -> PiecewisePolynomialPdf:
        return self._pdf(self.lo)

    @property
    def lower_mass(self) -> float:
        return float(np.sum(self.lo * self.partition.volumes))

    @property
    def upper_mass(self) -> float:
        return float(np.sum(self.hi * self.partition.volumes))

    @property
    def gap_mass(self) -> float:
        return float(np.sum((self.hi - self.lo) * self.partition.volumes))

    def locate(self, X) -> np.ndarray:
        """Index of a simplex containing each point (first match)."""
        from .geometry import simplex_halfspaces

        X = np.atleast_2d(X)
        out = np.full(len(X), -1)
        for i, s in enumerate(self.partition.simplices):
            A, b = simplex_halfspaces(s)
            hit = (out < 0) & np.all(X @ A.T <= b + 1e-12, axis=1)
            out[hit] = i
        return out


def _constant_bounds(dist: InputDistribution, S: np.ndarray):
    lo, hi = dist.density_bounds(S.min(axis=1), S.max(axis=1))
    return np.maximum(lo, 0.0), hi


def bound_pdf(dist: InputDistribution, part: SimplicialPartition) -> PdfBoundsPair:
    """Per-simplex constants from the density's range over each bounding box."""
    if dist.box != part.box:
        raise ValueError("partition box differs from the distribution's box")
    lo, hi = _constant_bounds(dist, part.simplices)
    return PdfBoundsPair(part, lo, hi, dist)


def refine(pair: PdfBoundsPair, budget: int, dist: InputDistribution | None = None) -> PdfBoundsPair:
    """Bisect simplices with the largest gap mass first until the budget is hit.

    Child constants are intersected with the parent's so that bounds are
    nested pointwise.
    """
    dist = dist if dist is not None else pair.source
    if dist is None:
        raise ValueError("refine needs the distribution the bounds came from")
    part = pair.partition
    if budget < part.vertex_count:
        raise ValueError("budget is below the current vertex count")
    S = [s for s in part.simplices]
    lo = list(pair.lo)
    hi = list(pair.hi)
    vols = list(part.volumes)
    seen = {tuple(v) for v in part.simplices.reshape(-1, part.box.dim).tolist()}
    heap = [(-(hi[i] - lo[i]) * vols[i], tuple(S[i].ravel()), i) for i in range(len(S))]
    heapq.heapify(heap)
    alive = [True] * len(S)
    count = part.vertex_count
    while heap:
        gap, _, i = heapq.heappop(heap)
        if gap >= 0:
            break
        kids = bisect_simplices(S[i][None])
        mid = kids[0][~np.all(kids[0] == S[i], axis=1)][0]
        new_vertex = tuple(mid.tolist()) not in seen
        if count + new_vertex > budget:
            break
        if new_vertex:
            seen.add(tuple(mid.tolist()))
            count += 1
        alive[i] = False
        clo, chi = _constant_bounds(dist, kids)
        for k in range(2):
            S.append(kids[k])
            lo.append(max(clo[k], lo[i]))
            hi.append(min(chi[k], hi[i]))
            vols.append(0.5 * vols[i])
            alive.append(True)
            j = len(S) - 1
            heapq.heappush(heap, (-(hi[j] - lo[j]) * vols[j], tuple(S[j].ravel()), j))
    keep = np.nonzero(alive)[0]
    new_part = SimplicialPartition(np.array([S[i] for i in keep]), count, part.box)
    return PdfBoundsPair(new_part, np.array(lo)[keep], np.array(hi)[keep], dist)
