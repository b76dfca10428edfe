"""Activation cells of piecewise-linear networks over a box.

Cells are found depth first.  A cell is kept in vertex form; at every
ReLU layer the pre-activations are evaluated at its vertices and the cell
is cut along each neuron hyperplane that passes through its interior.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import HPolytope, box_piece, piece_volume, split_piece
from .model.activations import ActivationKind
from .model.network import Box, DimensionError, FeedforwardNetwork

# cells thinner than this (normalised distance) along a neuron's
# hyperplane are not split; the neuron gets the side holding the cell
SLIVER_TOL = 1e-10


class BudgetError(RuntimeError):
    pass


class UnsupportedNetworkError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AffineMap:
    V: np.ndarray
    c: np.ndarray

    def __call__(self, X) -> np.ndarray:
        return np.atleast_2d(X) @ self.V.T + self.c

    def __eq__(self, other):
        return isinstance(other, AffineMap) and np.array_equal(self.V, other.V) and np.array_equal(self.c, other.c)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ActivationCell:
    vertices: np.ndarray
    map: AffineMap
    pattern_bytes: bytes
    n_relu: int
    _source: CellCollection | None = field(default=None, repr=False)

    @property
    def pattern(self) -> str:
        bits = np.unpackbits(np.frombuffer(self.pattern_bytes, dtype=np.uint8))[: self.n_relu]
        return "".join("1" if b else "0" for b in bits)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def volume(self) -> float:
        return piece_volume(self.vertices)

    @property
    def polytope(self) -> HPolytope:
        """Box plus one halfspace per ReLU neuron, fixed by the pattern."""
        if self._source is None:
            raise ValueError("cell is detached from its network")
        return self._source.cell_polytope(self)

    def interior_points(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Random strict convex combinations of the vertices."""
        w = rng.dirichlet(np.ones(len(self.vertices)), size=n)
        return w @ self.vertices


@dataclass(eq=False)
class CellCollection:
    cells: list
    box: Box
    net: FeedforwardNetwork

    def __len__(self):
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells)

    def __getitem__(self, i):
        return self.cells[i]

    @property
    def total_volume(self) -> float:
        return math.fsum(c.volume for c in self.cells)

    def cell_polytope(self, cell: ActivationCell) -> HPolytope:
        bits = np.array([ch == "1" for ch in cell.pattern])
        A, b = self.box.halfspaces()
        rows, rhs = [A], [b]
        n0 = self.net.n_inputs
        M, t = np.eye(n0), np.zeros(n0)
        pos = 0
        for layer in self.net.layers:
            Z, z = layer.weights @ M, layer.weights @ t + layer.bias
            if layer.activation is ActivationKind.RELU:
                on = bits[pos : pos + len(z)]
                pos += len(z)
                sign = np.where(on, -1.0, 1.0)
                rows.append(sign[:, None] * Z)
                rhs.append(-sign * z)
                Z, z = Z * on[:, None], z * on
            M, t = Z, z
        return HPolytope(np.vstack(rows), np.concatenate(rhs))

    def to_json(self) -> dict:
        out = []
        for c in self.cells:
            P = c.polytope
            out.append(
                {
                    "pattern": c.pattern,
                    "halfspaces": {"A": P.A.tolist(), "b": P.b.tolist()},
                    "map": {"V": c.map.V.tolist(), "c": c.map.c.tolist()},
                    "vertices": c.vertices.tolist(),
                }
            )
        return {"box": {"lower": self.box.lower.tolist(), "upper": self.box.upper.tolist()}, "cells": out}

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


def _check_supported(net: FeedforwardNetwork):
    for i, layer in enumerate(net.layers):
        if not layer.activation.is_piecewise_linear:
            raise UnsupportedNetworkError(
                f"layer {i} uses non-ReLU activation {layer.activation.value!r}; bound the network first"
            )


def _split_cell(V, Z, z, idx, scale):
    """Cut ``V`` by every hyperplane ``Z[j] x + z[j] = 0`` (``j`` in ``idx``).

    Yields ``(piece, active)`` with a boolean vector over ``idx``.
    """
    stack = [(V, idx, np.zeros(0, dtype=int), np.zeros(0, dtype=bool))]
    while stack:
        V, todo, fixed, fixed_on = stack.pop()
        if len(todo):
            D = (V @ Z[todo].T + z[todo]) / scale[todo]
            hi, lo = D.max(axis=0), D.min(axis=0)
            cut = (hi > SLIVER_TOL) & (lo < -SLIVER_TOL)
            settled = ~cut
            fixed = np.concatenate([fixed, todo[settled]])
            fixed_on = np.concatenate([fixed_on, lo[settled] >= -SLIVER_TOL])
            todo = todo[cut]
        if not len(todo):
            yield V, fixed, fixed_on
            continue
        j, rest = todo[0], todo[1:]
        below, above = split_piece(V, Z[j], -z[j])
        if above is not None:
            stack.append((above, rest, np.append(fixed, j), np.append(fixed_on, True)))
        if below is not None:
            stack.append((below, rest, np.append(fixed, j), np.append(fixed_on, False)))


def _affine(layer, unique, M, t):
    U, inv = unique
    return (U @ M)[inv], (U @ t)[inv] + layer.bias


def enumerate_cells(net: FeedforwardNetwork, box: Box, max_cells: int = 10**6) -> CellCollection:
    _check_supported(net)
    if box.dim != net.n_inputs:
        raise DimensionError(f"box has dimension {box.dim}, network expects {net.n_inputs}")
    if box.volume == 0:
        raise ValueError("box has no interior")
    n0 = net.n_inputs
    layers = net.layers
    relu_sizes = [l.n_out if l.activation is ActivationKind.RELU else 0 for l in layers]
    n_relu = sum(relu_sizes)
    # units that differ only in bias share a weight row; bounding networks
    # have many of these, so products are taken over unique rows only
    uniq = []
    for layer in layers:
        first: dict = {}
        inv = np.array([first.setdefault(row.tobytes(), len(first)) for row in layer.weights], dtype=int)
        rows = np.zeros(len(first), dtype=int)
        rows[inv] = np.arange(len(inv))
        uniq.append((layer.weights[rows], inv))
    found = []
    # stack entries: (vertices, layer index, M, t, pattern bits so far)
    stack = [(box_piece(box), 0, np.eye(n0), np.zeros(n0), [])]
    while stack:
        V, li, M, t, bits = stack.pop()
        while li < len(layers) and layers[li].activation is ActivationKind.IDENTITY:
            M, t = _affine(layers[li], uniq[li], M, t)
            li += 1
        if li == len(layers):
            found.append((V, M, t, bits))
            if len(found) > max_cells:
                raise BudgetError(f"more than {max_cells} activation cells")
            continue
        layer = layers[li]
        Z, z = _affine(layer, uniq[li], M, t)
        scale = np.linalg.norm(Z, axis=1)
        live = np.nonzero(scale > 0)[0]
        for piece, idx, on in _split_cell(V, Z, z, live, scale):
            active = np.zeros(len(z), dtype=bool)
            active[idx] = on
            dead = scale == 0
            active[dead] = z[dead] >= 0
            stack.append((piece, li + 1, Z * active[:, None], z * active, bits + [active]))
    cells = []
    coll = CellCollection(cells, box, net)
    for V, M, t, bits in found:
        pattern = np.concatenate(bits) if bits else np.zeros(0, dtype=bool)
        M = np.array(M)
        t = np.array(t)
        cells.append(ActivationCell(V, AffineMap(M, t), np.packbits(pattern).tobytes(), n_relu, coll))
    cells.sort(key=lambda c: c.pattern_bytes)
    return coll


def cell_count_bound(net: FeedforwardNetwork, box: Box | None = None) -> int:
    """Upper bound on the number of activation cells.

    Returns the larger of ``(max width) ** (n_0 * L)`` over the ReLU layers
    and the product of per-layer hyperplane-arrangement counts
    ``sum_{j <= n_0} C(n_l, j)``; the latter is a strict guarantee.
    """
    n0 = net.n_inputs
    widths = [l.n_out for l in net.layers if l.activation is ActivationKind.RELU]
    if not widths:
        return 1
    asym = max(widths) ** (n0 * len(widths))
    arrangement = 1
    for w in widths:
        arrangement *= sum(math.comb(w, j) for j in range(min(n0, w) + 1))
    return int(max(asym, arrangement))
