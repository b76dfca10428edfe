"""Polytopes, simplices and exact polynomial integration.

Integration uses the barycentric monomial rule

    int_S lambda^beta dx = |det E| * beta! / (|beta| + n)!

after writing every Cartesian coordinate as a linear form in the
barycentric coordinates of ``S`` (``E`` is the edge matrix).  The same
expansion code runs on float arrays (many simplices at once) and on
``Fraction`` scalars (exact mode).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, Delaunay, HalfspaceIntersection, QhullError

from .errors import DimensionError

if TYPE_CHECKING:
    from .model.network import Box

FEAS_TOL = 1e-9
DEGENERACY_TOL = 1e-12


class GeometryError(ValueError):
    pass


class DegenerateSimplexError(GeometryError):
    pass


class UnboundedError(GeometryError):
    pass


# ---------------------------------------------------------------------------
# polynomials


class Polynomial:
    """Sparse multivariate polynomial ``{exponent tuple: coefficient}``."""

    __slots__ = ("_terms", "_dim")

    def __init__(self, terms: Mapping[Sequence[int], object], dim: int):
        clean = {}
        for exps, coef in terms.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != dim:
                raise DimensionError(f"exponent {exps} does not match dimension {dim}")
            if any(e < 0 for e in exps):
                raise ValueError("exponents must be nonnegative")
            if coef != 0:
                clean[exps] = clean.get(exps, 0) + coef
        self._terms = {k: v for k, v in clean.items() if v != 0}
        self._dim = int(dim)

    @classmethod
    def constant(cls, value, dim: int) -> Polynomial:
        return cls({(0,) * dim: value}, dim)

    @classmethod
    def variable(cls, index: int, dim: int) -> Polynomial:
        exps = [0] * dim
        exps[index] = 1
        return cls({tuple(exps): 1}, dim)

    @classmethod
    def from_univariate(cls, coeffs: Sequence, axis: int, dim: int) -> Polynomial:
        """``sum_k coeffs[k] * x_axis**k``."""
        terms = {}
        for k, c in enumerate(coeffs):
            exps = [0] * dim
            exps[axis] = k
            terms[tuple(exps)] = c
        return cls(terms, dim)

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self._terms), default=0)

    @property
    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self._terms)

    @property
    def constant_value(self):
        return self._terms.get((0,) * self._dim, 0)

    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            if other.dim != self.dim:
                raise DimensionError("polynomial dimensions differ")
            return other
        return Polynomial.constant(other, self._dim)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self._terms)
        for k, v in other._terms.items():
            terms[k] = terms.get(k, 0) + v
        return Polynomial(terms, self._dim)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({k: -v for k, v in self._terms.items()}, self._dim)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial({k: v * other for k, v in self._terms.items()}, self._dim)
        other = self._coerce(other)
        terms: dict = {}
        for k1, v1 in self._terms.items():
            for k2, v2 in other._terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                terms[k] = terms.get(k, 0) + v1 * v2
        return Polynomial(terms, self._dim)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Polynomial.constant(1, self._dim)
        for _ in range(k):
            out = out * self
        return out

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self._dim:
            raise DimensionError(f"expected points of dimension {self._dim}")
        out = np.zeros(X.shape[0])
        for exps, coef in self._terms.items():
            term = np.full(X.shape[0], float(coef))
            for k, e in enumerate(exps):
                if e:
                    term = term * X[:, k] ** e
            out += term
        return out[0] if single else out

    def compose_affine(self, M, t) -> Polynomial:
        """The polynomial ``x -> p(M x + t)``; ``M`` is ``dim x m``."""
        M = np.asarray(M, dtype=object) if _is_exact(M) else np.asarray(M, dtype=float)
        m = M.shape[1]
        forms = []
        for k in range(self._dim):
            terms = {(0,) * m: t[k]}
            for j in range(m):
                exps = [0] * m
                exps[j] = 1
                terms[tuple(exps)] = M[k, j]
            forms.append(Polynomial(terms, m))
        out = Polynomial({}, m)
        for exps, coef in self._terms.items():
            term = Polynomial.constant(coef, m)
            for k, e in enumerate(exps):
                if e:
                    term = term * forms[k] ** e
            out = out + term
        return out

    def to_rational(self) -> Polynomial:
        return Polynomial({k: Fraction(v) for k, v in self._terms.items()}, self._dim)

    def key(self) -> tuple:
        return (self._dim, tuple(sorted((k, float(v)) for k, v in self._terms.items())))

    def __eq__(self, other):
        return isinstance(other, Polynomial) and self._dim == other._dim and self._terms == other._terms

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        if not self._terms:
            return "Polynomial(0)"
        parts = []
        for exps, coef in sorted(self._terms.items()):
            mono = "*".join(f"x{k}^{e}" if e > 1 else f"x{k}" for k, e in enumerate(exps) if e)
            parts.append(f"{coef}" + (f"*{mono}" if mono else ""))
        return "Polynomial(" + " + ".join(parts) + ")"


def _is_exact(a) -> bool:
    flat = np.asarray(a, dtype=object).ravel()
    return len(flat) > 0 and isinstance(flat[0], (Fraction, int)) and not isinstance(flat[0], bool)


# ---------------------------------------------------------------------------
# simplices and integration


@dataclass(frozen=True, eq=False)
class Simplex:
    vertices: np.ndarray

    def __post_init__(self):
        V = np.array(self.vertices, dtype=float)
        if V.ndim != 2 or V.shape[0] != V.shape[1] + 1:
            raise DimensionError(f"a simplex in R^n needs n+1 vertices, got shape {V.shape}")
        V.setflags(write=False)
        object.__setattr__(self, "vertices", V)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def edge_matrix(self) -> np.ndarray:
        return (self.vertices[1:] - self.vertices[0]).T

    @property
    def volume(self) -> float:
        return abs(float(np.linalg.det(self.edge_matrix))) / math.factorial(self.dim)

    @property
    def is_degenerate(self) -> bool:
        return bool(simplex_degenerate(self.vertices[None])[0])

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        return simplex_halfspaces(self.vertices)

    def contains(self, X, tol: float = 1e-12) -> np.ndarray:
        A, b = self.halfspaces()
        X = np.atleast_2d(X)
        return np.all(X @ A.T <= b + tol, axis=1)


def simplex_degenerate(S: np.ndarray, tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Flags for a stack of simplices ``S`` of shape ``(m, n+1, n)``."""
    E = S[:, 1:, :] - S[:, :1, :]
    det = np.abs(np.linalg.det(E)) if S.shape[2] > 0 else np.ones(len(S))
    scale = np.prod(np.linalg.norm(E, axis=2), axis=1)
    return det <= tol * np.maximum(scale, np.finfo(float).tiny)


def simplex_halfspaces(V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(A, b)`` with the simplex equal to ``{x : A x <= b}`` (barycentric >= 0)."""
    V = np.asarray(V, dtype=float)
    E = (V[1:] - V[0]).T
    Einv = np.linalg.inv(E)
    # lambda_{1..n} = Einv (x - v0), lambda_0 = 1 - sum
    B = np.vstack([-Einv.sum(axis=0), Einv])
    d = np.concatenate([[1.0 + Einv.sum(axis=0) @ V[0]], -Einv @ V[0]])
    return -B, d


def _lam_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for k1, v1 in p.items():
        for k2, v2 in q.items():
            k = tuple(a + b for a, b in zip(k1, k2))
            if k in out:
                out[k] = out[k] + v1 * v2
            else:
                out[k] = v1 * v2
    return out


def _barycentric_sum(p: Polynomial, coords, one, n: int):
    """``sum_beta coef_beta * beta! / (|beta| + n)!`` for ``p`` pulled back.

    ``coords[k][i]`` is coordinate ``k`` of vertex ``i`` (arrays or exact scalars).
    """
    nv = n + 1
    unit = tuple([0] * nv)
    forms = []
    for k in range(n):
        form = {}
        for i in range(nv):
            e = [0] * nv
            e[i] = 1
            form[tuple(e)] = coords[k][i]
        forms.append(form)
    powers = [[{unit: one}] for _ in range(n)]
    expansion: dict = {}
    for exps, coef in p.terms.items():
        term = {unit: one}
        for k, e in enumerate(exps):
            while len(powers[k]) <= e:
                powers[k].append(_lam_mul(powers[k][-1], forms[k]))
            if e:
                term = _lam_mul(term, powers[k][e])
        for beta, v in term.items():
            v = v * coef
            expansion[beta] = expansion[beta] + v if beta in expansion else v
    total = 0 * one
    for beta, v in sorted(expansion.items()):
        weight = Fraction(math.prod(math.factorial(b) for b in beta), math.factorial(sum(beta) + n))
        total = total + v * (weight if isinstance(one, Fraction) else float(weight))
    return total


def integrate_simplices(p: Polynomial, S: np.ndarray) -> np.ndarray:
    """Exact (up to rounding) integrals of ``p`` over a stack of simplices.

    ``S`` has shape ``(m, n+1, n)``.  Degenerate simplices integrate to 0.
    """
    S = np.asarray(S, dtype=float)
    m, nv, n = S.shape
    if nv != n + 1:
        raise DimensionError("simplex stack must have shape (m, n+1, n)")
    if p.dim != n:
        raise DimensionError(f"polynomial has dimension {p.dim}, simplices {n}")
    if m == 0:
        return np.zeros(0)
    det = np.abs(np.linalg.det(S[:, 1:, :] - S[:, :1, :]))
    if p.is_constant:
        return det * (float(p.constant_value) / math.factorial(n))
    coords = [[S[:, i, k] for i in range(nv)] for k in range(n)]
    total = _barycentric_sum(p, coords, np.ones(m), n)
    return det * total


def integrate_polynomial_over_simplex(p: Polynomial, s: Simplex | np.ndarray, exact: bool = False):
    """Integral of ``p`` over one simplex.

    With ``exact=True`` vertices and coefficients are converted to
    ``Fraction`` and the result is an exact rational.
    """
    V = s.vertices if isinstance(s, Simplex) else np.asarray(s, dtype=object if exact else float)
    n = V.shape[1]
    if V.shape[0] != n + 1:
        raise DimensionError("a simplex in R^n needs n+1 vertices")
    if p.dim != n:
        raise DimensionError(f"polynomial has dimension {p.dim}, simplex {n}")
    if not exact:
        Vf = np.asarray(V, dtype=float)
        if simplex_degenerate(Vf[None])[0]:
            raise DegenerateSimplexError("simplex is degenerate")
        return float(integrate_simplices(p, Vf[None])[0])
    Vq = [[Fraction(V[i, k]) for k in range(n)] for i in range(n + 1)]
    E = [[Vq[j + 1][k] - Vq[0][k] for j in range(n)] for k in range(n)]
    det = abs(_fraction_det(E))
    if det == 0:
        raise DegenerateSimplexError("simplex is degenerate")
    coords = [[Vq[i][k] for i in range(n + 1)] for k in range(n)]
    total = _barycentric_sum(p.to_rational(), coords, Fraction(1), n)
    return det * total


def _fraction_det(M: list[list[Fraction]]) -> Fraction:
    M = [row[:] for row in M]
    n = len(M)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            det = -det
        det *= M[c][c]
        for r in range(c + 1, n):
            f = M[r][c] / M[c][c]
            if f:
                for k in range(c, n):
                    M[r][k] -= f * M[c][k]
    return det


# ---------------------------------------------------------------------------
# halfspaces and H-polytopes


@dataclass(frozen=True, eq=False)
class Halfspace:
    """``{x : normal . x <= offset}``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        v = np.array(self.normal, dtype=float).ravel()
        if not np.any(v):
            raise ValueError("halfspace normal must be nonzero")
        v.setflags(write=False)
        object.__setattr__(self, "normal", v)
        object.__setattr__(self, "offset", float(self.offset))

    def contains(self, X, tol: float = 0.0) -> np.ndarray:
        return np.atleast_2d(X) @ self.normal <= self.offset + tol


class _Empty:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EMPTY"

    def __bool__(self):
        return False


EMPTY = _Empty()


class HPolytope:
    """Intersection of closed halfspaces ``{x : A x <= b}``."""

    def __init__(self, A, b):
        A = np.array(A, dtype=float)
        b = np.array(b, dtype=float).ravel()
        if A.ndim != 2 or A.shape[0] != b.shape[0]:
            raise DimensionError("A must be (m, n) and b of length m")
        if A.shape[0] and np.any(~np.any(A != 0, axis=1)):
            raise ValueError("halfspace normal must be nonzero")
        A.setflags(write=False)
        b.setflags(write=False)
        self.A, self.b = A, b

    @classmethod
    def from_halfspaces(cls, halfspaces: Iterable[Halfspace], dim: int | None = None) -> HPolytope:
        hs = list(halfspaces)
        if not hs:
            if dim is None:
                raise ValueError("dimension needed for an empty halfspace list")
            return cls(np.zeros((0, dim)), np.zeros(0))
        return cls(np.vstack([h.normal for h in hs]), [h.offset for h in hs])

    @classmethod
    def from_box(cls, box: Box) -> HPolytope:
        return cls(*box.halfspaces())

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def halfspaces(self) -> list[Halfspace]:
        return [Halfspace(a, c) for a, c in zip(self.A, self.b)]

    def __len__(self) -> int:
        return self.A.shape[0]

    def contains(self, X, tol: float = FEAS_TOL) -> np.ndarray:
        X = np.atleast_2d(X)
        if len(self) == 0:
            return np.ones(X.shape[0], dtype=bool)
        return np.all(X @ self.A.T <= self.b + tol, axis=1)

    def chebyshev_center(self) -> tuple[np.ndarray, float] | None:
        """Largest inscribed ball; ``None`` when infeasible."""
        n = self.dim
        norms = np.linalg.norm(self.A, axis=1)
        c = np.zeros(n + 1)
        c[-1] = -1.0
        A_ub = np.hstack([self.A, norms[:, None]])
        res = linprog(c, A_ub=A_ub, b_ub=self.b, bounds=[(None, None)] * n + [(0, None)], method="highs")
        if res.status == 2:
            return None
        if res.status == 3:
            raise UnboundedError("polytope is unbounded")
        return res.x[:n], float(res.x[-1])

    def __repr__(self):
        return f"HPolytope({len(self)} halfspaces in R^{self.dim})"


def _lp_max(a, A, b):
    res = linprog(-a, A_ub=A, b_ub=b, bounds=[(None, None)] * len(a), method="highs")
    if res.status == 3:
        return np.inf
    if res.status == 2:
        return -np.inf
    return -res.fun


def remove_redundant(poly: HPolytope, tol: float = FEAS_TOL) -> HPolytope:
    """Drop every halfspace implied by the remaining ones (one LP each)."""
    keep = list(range(len(poly)))
    for i in range(len(poly)):
        others = [j for j in keep if j != i]
        if not others:
            continue
        best = _lp_max(poly.A[i], poly.A[others], poly.b[others])
        if best <= poly.b[i] + tol * max(1.0, abs(poly.b[i])):
            keep.remove(i)
    return HPolytope(poly.A[keep], poly.b[keep])


def intersect(poly: HPolytope, extra: Iterable[Halfspace]) -> HPolytope | _Empty:
    extra = list(extra)
    A = np.vstack([poly.A] + [h.normal[None] for h in extra]) if extra else poly.A
    b = np.concatenate([poly.b, [h.offset for h in extra]]) if extra else poly.b
    joined = HPolytope(A, b)
    if len(joined) == 0:
        return joined
    res = linprog(np.zeros(joined.dim), A_ub=A, b_ub=b + FEAS_TOL, bounds=[(None, None)] * joined.dim, method="highs")
    if res.status == 2:
        return EMPTY
    return remove_redundant(joined)


def _unique_rows(P: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    if len(P) == 0:
        return P
    scale = max(1.0, float(np.abs(P).max()))
    key = np.round(P / (tol * scale)).astype(np.int64)
    _, idx = np.unique(key, axis=0, return_index=True)
    return P[np.sort(idx)]


def vertices(poly: HPolytope, box: Box | None = None) -> np.ndarray:
    """Vertices of ``poly`` (intersected with ``box`` when given)."""
    if box is not None:
        if box.dim != poly.dim:
            raise DimensionError("box and polytope dimensions differ")
        bA, bb = box.halfspaces()
        poly = HPolytope(np.vstack([poly.A, bA]), np.concatenate([poly.b, bb]))
    n = poly.dim
    if len(poly) == 0:
        raise UnboundedError("whole space has no vertices; pass a box")
    try:
        center = poly.chebyshev_center()
    except UnboundedError:
        raise UnboundedError("polytope is unbounded; pass a box") from None
    if center is None:
        return np.zeros((0, n))
    x0, radius = center
    if n == 1:
        a, b = poly.A[:, 0], poly.b
        hi = np.min(b[a > 0] / a[a > 0])
        lo = np.max(b[a < 0] / a[a < 0])
        return np.array([[lo], [hi]]) if hi > lo else np.array([[lo]])
    if radius > 1e-10 * max(1.0, float(np.abs(x0).max())):
        try:
            hs = HalfspaceIntersection(np.hstack([poly.A, -poly.b[:, None]]), x0)
            P = hs.intersections
            P = P[np.all(np.isfinite(P), axis=1)]
            return _sort_lex(_unique_rows(_polish_vertices(poly, P)))
        except QhullError:
            pass
    return _sort_lex(_brute_force_vertices(poly))


def _polish_vertices(poly: HPolytope, P: np.ndarray) -> np.ndarray:
    """Re-solve each vertex from its active constraints to remove qhull noise."""
    out = P.copy()
    scale = 1.0 + np.abs(poly.b)
    for i, x in enumerate(P):
        act = np.abs(poly.A @ x - poly.b) <= 1e-9 * scale
        if act.sum() >= poly.dim and np.linalg.matrix_rank(poly.A[act]) == poly.dim:
            out[i] = np.linalg.lstsq(poly.A[act], poly.b[act], rcond=None)[0]
    return out


def _brute_force_vertices(poly: HPolytope, tol: float = FEAS_TOL) -> np.ndarray:
    n = poly.dim
    pts = []
    for rows in itertools.combinations(range(len(poly)), n):
        M = poly.A[list(rows)]
        if abs(np.linalg.det(M)) < 1e-14:
            continue
        x = np.linalg.solve(M, poly.b[list(rows)])
        if np.all(poly.A @ x <= poly.b + tol * (1 + np.abs(poly.b))):
            pts.append(x)
    return _unique_rows(np.array(pts).reshape(-1, n))


def _sort_lex(P: np.ndarray) -> np.ndarray:
    if len(P) == 0:
        return P
    return P[np.lexsort(P.T[::-1])]


# ---------------------------------------------------------------------------
# triangulation


@dataclass(frozen=True)
class Triangulation:
    simplices: list
    degenerate: bool = False

    def __iter__(self):
        return iter(self.simplices)

    def __len__(self):
        return len(self.simplices)

    def __getitem__(self, i):
        return self.simplices[i]

    def as_array(self, dim: int) -> np.ndarray:
        if not self.simplices:
            return np.zeros((0, dim + 1, dim))
        return np.stack([s.vertices for s in self.simplices])

    @property
    def volume(self) -> float:
        return float(sum(s.volume for s in self.simplices))


def affine_rank(P: np.ndarray, tol: float = 1e-10) -> int:
    if len(P) <= 1:
        return 0
    D = P - P[0]
    s = np.linalg.svd(D, compute_uv=False)
    scale = max(1.0, float(np.abs(P).max()))
    return int(np.sum(s > tol * scale))


def triangulate_array(points) -> np.ndarray:
    """Delaunay simplices of ``points`` as an ``(m, n+1, n)`` array.

    Points are sorted lexicographically first so that ties between
    cospherical configurations resolve the same way on every run.
    Degenerate input gives an empty array.
    """
    P = _sort_lex(_unique_rows(np.atleast_2d(np.asarray(points, dtype=float))))
    n = P.shape[1]
    if len(P) < n + 1 or affine_rank(P) < n:
        return np.zeros((0, n + 1, n))
    if n == 1:
        return np.array([[[P[0, 0]], [P[-1, 0]]]])
    if n == 2 and len(P) == 3:
        return P[None].copy()
    try:
        tri = Delaunay(P)
    except QhullError:
        return np.zeros((0, n + 1, n))
    S = P[tri.simplices]
    return S[~simplex_degenerate(S)]


def triangulate(points) -> Triangulation:
    S = triangulate_array(points)
    return Triangulation([Simplex(s) for s in S], degenerate=len(S) == 0)


def convex_hull_volume(points) -> float:
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[1] == 1:
        return float(P.max() - P.min())
    try:
        return float(ConvexHull(P).volume)
    except QhullError:
        return 0.0


# ---------------------------------------------------------------------------
# convex pieces in vertex form
#
# In 2D a piece is a counter-clockwise vertex list, in 1D a sorted pair,
# otherwise an unordered vertex array (possibly with redundant points).


def order_polygon(P: np.ndarray) -> np.ndarray:
    """Counter-clockwise order for the vertices of a convex polygon."""
    c = P.mean(axis=0)
    ang = np.arctan2(P[:, 1] - c[1], P[:, 0] - c[0])
    return P[np.argsort(ang, kind="stable")]


def _split_polygon(P: list, s: list):
    below, above = [], []
    k = len(P)
    for i in range(k):
        j = (i + 1) % k
        si, sj = s[i], s[j]
        if si <= 0:
            below.append(P[i])
        if si >= 0:
            above.append(P[i])
        if (si < 0 < sj) or (sj < 0 < si):
            t = si / (si - sj)
            pi, pj = P[i], P[j]
            q = (pi[0] + t * (pj[0] - pi[0]), pi[1] + t * (pj[1] - pi[1]))
            below.append(q)
            above.append(q)
    return below, above


def split_piece(V: np.ndarray, a: np.ndarray, c: float):
    """Split a convex piece by the hyperplane ``a . x = c``.

    Returns ``(below, above)`` vertex arrays for ``a . x <= c`` and
    ``a . x >= c``; a side with no interior is returned as ``None``.
    """
    n = V.shape[1]
    s = V @ a - c
    if np.all(s <= 0):
        return V, None
    if np.all(s >= 0):
        return None, V
    if n == 1:
        x = c / a[0]
        left, right = np.array([[V[:, 0].min()], [x]]), np.array([[x], [V[:, 0].max()]])
        return (left, right) if a[0] > 0 else (right, left)
    if n == 2:
        b, u = _split_polygon([tuple(p) for p in V.tolist()], s.tolist())
        return np.array(b), np.array(u)
    return _clip_general(V, s, below=True), _clip_general(V, s, below=False)


def _clip_general(V, s, below: bool):
    keep = s <= 0 if below else s >= 0
    inner = np.where(keep)[0]
    outer = np.where(~keep)[0]
    pts = [V[inner]]
    si, so = s[inner][:, None], s[outer][None, :]
    cross = (si * so) < 0
    ii, oo = np.nonzero(cross)
    if len(ii):
        t = (s[inner][ii] / (s[inner][ii] - s[outer][oo]))[:, None]
        pts.append(V[inner][ii] + t * (V[outer][oo] - V[inner][ii]))
    P = np.vstack(pts)
    if len(P) > V.shape[1] + 1:
        try:
            P = P[ConvexHull(P).vertices]
        except QhullError:
            pass
    return P


def clip_piece(V: np.ndarray, A: np.ndarray, b: np.ndarray):
    """Vertices of ``conv(V) cap {A x <= b}``; ``None`` if it has no interior."""
    for a, c in zip(A, b):
        V, _ = split_piece(V, a, c)
        if V is None:
            return None
    return V


def piece_simplices(V: np.ndarray) -> np.ndarray:
    """Triangulate a convex piece given in vertex form."""
    n = V.shape[1]
    if n == 1:
        return np.array([[[V[:, 0].min()], [V[:, 0].max()]]])
    if n == 2:
        k = len(V)
        idx = np.arange(1, k - 1)
        S = np.stack([np.repeat(V[:1], k - 2, axis=0), V[idx], V[idx + 1]], axis=1)
        return S[~simplex_degenerate(S)] if len(S) else S.reshape(0, 3, 2)
    return triangulate_array(V)


def piece_volume(V: np.ndarray) -> float:
    n = V.shape[1]
    if n == 1:
        return float(V[:, 0].max() - V[:, 0].min())
    if n == 2:
        x, y = V[:, 0], V[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
    return convex_hull_volume(V)


def box_piece(box: Box) -> np.ndarray:
    """Vertex form of a box."""
    C = box.corners()
    if box.dim == 1:
        return np.array([[box.lower[0]], [box.upper[0]]])
    if box.dim == 2:
        (x0, y0), (x1, y1) = box.lower, box.upper
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    return C


def chebyshev_radius(V: np.ndarray) -> float:
    """Inradius of the convex hull of ``V`` (0 when degenerate)."""
    n = V.shape[1]
    if n == 1:
        return 0.5 * float(V[:, 0].max() - V[:, 0].min())
    try:
        hull = ConvexHull(V)
    except QhullError:
        return 0.0
    poly = HPolytope(hull.equations[:, :-1], -hull.equations[:, -1])
    center = poly.chebyshev_center()
    return 0.0 if center is None else center[1]


def kuhn_triangulation(box: Box, cells_per_axis: int) -> np.ndarray:
    """Kuhn (Freudenthal) split of a regular grid over ``box``.

    Each of the ``k**n`` grid cells contributes ``n!`` simplices.  Vertex
    coordinates are computed from integer grid indices so that shared
    vertices are bit-identical across neighbouring simplices.
    """
    k = int(cells_per_axis)
    if k < 1:
        raise ValueError("cells_per_axis must be >= 1")
    n = box.dim
    cells = np.stack(np.meshgrid(*[np.arange(k)] * n, indexing="ij"), axis=-1).reshape(-1, n)
    perms = list(itertools.permutations(range(n)))
    idx = np.empty((len(cells), len(perms), n + 1, n), dtype=np.int64)
    for p, perm in enumerate(perms):
        cur = cells.copy()
        idx[:, p, 0] = cur
        for j, axis in enumerate(perm):
            cur = cur.copy()
            cur[:, axis] += 1
            idx[:, p, j + 1] = cur
    idx = idx.reshape(-1, n + 1, n)
    return grid_points(box, k, idx)


def grid_points(box: Box, k: int, idx: np.ndarray) -> np.ndarray:
    """Coordinates of integer grid indices; the last index maps exactly onto ``upper``."""
    t = idx / k
    P = box.lower + t * box.widths
    return np.where(idx == k, box.upper, P)
