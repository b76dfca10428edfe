"""Piecewise-linear bounds of monotone activations and their ReLU networks.

Each neuron's activation is bounded on its interval-propagated domain by
a pair of monotone piecewise-linear functions.  Curved segments get a
chord through the segment midpoint on one side and a pair of tangent
lines on the other; linear segments are reproduced exactly.  The bounds
are rewritten as one-hidden-layer ReLU fragments and wired into two
networks that sandwich the source network on the analysis box.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model.activations import ActivationKind
from .model.network import Box, FeedforwardNetwork, Interval, Layer, propagate_box

CONVEX, CONCAVE, LINEAR = "convex", "concave", "linear"


class UnsupportedActivationError(ValueError):
    pass


@dataclass(frozen=True)
class SegmentPlan:
    breakpoints: np.ndarray  # a_1 < ... < a_{n+1}
    tags: tuple  # one curvature tag per segment

    def __len__(self):
        return len(self.tags)

    def segments(self):
        a = self.breakpoints
        return [(float(a[i]), float(a[i + 1]), t) for i, t in enumerate(self.tags)]


def _curvature(act: ActivationKind, lo: float, hi: float) -> str:
    if act.is_linear_on(lo, hi):
        return LINEAR
    s = float(act.second_derivative(0.5 * (lo + hi)))
    if s > 0:
        return CONVEX
    if s < 0:
        return CONCAVE
    return LINEAR


def plan_segments(act: ActivationKind, iv: Interval, n_per_region: int) -> SegmentPlan:
    """Macro-areas split at inflection/kink points, each cut into equal parts.

    Linear macro-areas are kept whole since any further cut is redundant.
    """
    if n_per_region < 1:
        raise ValueError("n_per_region must be >= 1")
    lo, hi = float(iv.lo), float(iv.hi)
    if lo == hi:
        return SegmentPlan(np.array([lo, hi]), (LINEAR,))
    cuts = [lo] + [p for p in act.breakpoints if lo < p < hi] + [hi]
    pts, tags = [lo], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        tag = _curvature(act, a, b)
        k = 1 if tag == LINEAR else n_per_region
        inner = np.linspace(a, b, k + 1)
        inner[-1] = b
        pts.extend(inner[1:].tolist())
        tags.extend([tag] * k)
    return SegmentPlan(np.array(pts), tuple(tags))


@dataclass(frozen=True, eq=False)
class PiecewiseLinearScalar:
    """Continuous piecewise-linear map with ``x_0 < ... < x_n``.

    Piece ``i`` is ``v[i] * x + c[i]`` on ``[x[i], x[i+1]]``.  Below ``x_0``
    the value is held constant; above ``x_n`` the last piece continues,
    which is exactly what the ReLU form computes.
    """

    breakpoints: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray
    values: np.ndarray = field(repr=False)

    @classmethod
    def from_values(cls, x, y) -> PiecewiseLinearScalar:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        keep = np.concatenate([[True], np.diff(x) > 0])
        x, y = x[keep], y[keep]
        if len(x) == 1:
            # degenerate domain: a constant
            x = np.array([x[0], x[0] + 1.0])
            y = np.array([y[0], y[0]])
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            v = np.maximum(np.diff(y) / np.diff(x), 0.0)
        if not np.all(np.isfinite(v)):
            raise ValueError("breakpoints too close together: slope is not finite")
        # rebuild values from slopes so pieces join exactly where stored
        c = y[:-1] - v * x[:-1]
        for a in (x, y, v, c):
            a.setflags(write=False)
        return cls(x, v, c, y)

    @property
    def n_pieces(self) -> int:
        return len(self.slopes)

    @property
    def xi(self) -> np.ndarray:
        """Signs of the slope changes, with ``v_0 = 0``."""
        return np.sign(np.diff(np.concatenate([[0.0], self.slopes])))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        x, y = self.breakpoints, self.values
        inner = np.interp(t, x, y)
        return np.where(t > x[-1], y[-1] + self.slopes[-1] * (t - x[-1]), inner)

    def continuity_defect(self) -> float:
        x = self.breakpoints[1:-1]
        left = self.slopes[:-1] * x + self.intercepts[:-1]
        right = self.slopes[1:] * x + self.intercepts[1:]
        return float(np.max(np.abs(left - right), initial=0.0))


def chord_bound(act: ActivationKind, lo: float, hi: float) -> PiecewiseLinearScalar:
    """Interpolation through both ends and the midpoint of ``[lo, hi]``."""
    mid = 0.5 * (lo + hi)
    x = np.array([lo, mid, hi])
    return PiecewiseLinearScalar.from_values(x, act(x))


def tangent_point(act: ActivationKind, lo: float, hi: float) -> float | None:
    """Where the tangents at ``lo`` (right slope) and ``hi`` (left slope) meet."""
    d_lo = act.right_derivative(lo)
    d_hi = act.left_derivative(hi)
    den = d_hi - d_lo
    if den == 0.0:
        return None
    f_lo, f_hi = float(act(lo)), float(act(hi))
    a = (f_lo - f_hi - (d_lo * lo - d_hi * hi)) / den
    return float(np.clip(a, lo, hi))


def tangent_bound(act: ActivationKind, lo: float, hi: float) -> PiecewiseLinearScalar:
    """Two tangent pieces; falls back to the exact line when the slopes agree."""
    f_lo, f_hi = float(act(lo)), float(act(hi))
    a = tangent_point(act, lo, hi)
    if a is None or a <= lo or a >= hi:
        return PiecewiseLinearScalar.from_values([lo, hi], [f_lo, f_hi])
    y = f_lo + act.right_derivative(lo) * (a - lo)
    y = min(max(y, f_lo), f_hi)
    return PiecewiseLinearScalar.from_values([lo, a, hi], [f_lo, y, f_hi])


def _join(parts) -> PiecewiseLinearScalar:
    xs = [parts[0].breakpoints[:1]]
    ys = [parts[0].values[:1]]
    for p in parts:
        xs.append(p.breakpoints[1:])
        ys.append(p.values[1:])
    return PiecewiseLinearScalar.from_values(np.concatenate(xs), np.concatenate(ys))


def bound_activation(act: ActivationKind, iv: Interval, n_per_region: int):
    """``(upper, lower)`` piecewise-linear bounds of ``act`` on ``iv``."""
    plan = plan_segments(act, iv, n_per_region)
    ups, lows = [], []
    for lo, hi, tag in plan.segments():
        if tag == LINEAR:
            line = PiecewiseLinearScalar.from_values([lo, hi], act(np.array([lo, hi])))
            ups.append(line)
            lows.append(line)
        elif tag == CONVEX:
            ups.append(chord_bound(act, lo, hi))
            lows.append(tangent_bound(act, lo, hi))
        else:
            ups.append(tangent_bound(act, lo, hi))
            lows.append(chord_bound(act, lo, hi))
    return _join(ups), _join(lows)


@dataclass(frozen=True)
class ReluFragment:
    """``offset + sum_i xi_i * ReLU(w_i * t + b_i)``."""

    hidden_weights: np.ndarray
    hidden_bias: np.ndarray
    output_weights: np.ndarray
    offset: float

    @property
    def n_units(self) -> int:
        return len(self.hidden_weights)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        h = np.maximum(np.multiply.outer(t, self.hidden_weights) + self.hidden_bias, 0.0)
        return self.offset + h @ self.output_weights

    def network(self) -> FeedforwardNetwork:
        w, b, o = self.hidden_weights, self.hidden_bias, self.output_weights
        if not len(w):
            w, b, o = np.zeros(1), np.zeros(1), np.zeros(1)
        return FeedforwardNetwork(
            [Layer(w[:, None], b, ActivationKind.RELU), Layer(o[None, :], [self.offset], ActivationKind.IDENTITY)]
        )


def relu_units(pl: PiecewiseLinearScalar):
    """``(kinks, scales, signs)``: one unit per nonzero slope change."""
    dv = np.diff(np.concatenate([[0.0], pl.slopes]))
    keep = dv != 0
    return pl.breakpoints[:-1][keep], np.abs(dv[keep]), np.sign(dv[keep])


def to_relu_form(pl: PiecewiseLinearScalar) -> ReluFragment:
    kinks, scales, signs = relu_units(pl)
    offset = pl.breakpoints[0] * pl.slopes[0] + pl.intercepts[0]
    return ReluFragment(scales, -scales * kinks, signs, float(offset))


# ---------------------------------------------------------------------------
# network composition


@dataclass(frozen=True, eq=False)
class BoundedNetworkPair:
    upper: FeedforwardNetwork
    lower: FeedforwardNetwork
    source: FeedforwardNetwork
    segments_per_region: int
    box: Box | None = None

    @property
    def is_exact(self) -> bool:
        return self.upper is self.source and self.lower is self.source

    def gap(self, X) -> np.ndarray:
        return self.upper(X) - self.lower(X)

    def sandwich_violations(self, X, rtol: float = 1e-12) -> int:
        """Number of sample rows where ``lower <= source <= upper`` fails."""
        y = self.source(X)
        tol = rtol * (1.0 + np.abs(y))
        bad = (self.lower(X) > y + tol) | (self.upper(X) < y - tol)
        return int(np.any(bad, axis=1).sum())


def _widen(lo, hi, act: ActivationKind, rel: float = 1e-9):
    pad = rel * (1.0 + np.maximum(np.abs(lo), np.abs(hi)))
    new_lo = lo - pad
    if act.domain_min > -np.inf:
        new_lo = np.where(new_lo > act.domain_min, new_lo, 0.5 * (lo + act.domain_min))
    return new_lo, hi + pad


class _HiddenLayerBuilder:
    """Collects ReLU units, merging exact duplicates."""

    def __init__(self, width: int):
        self.rows: list = []
        self.bias: list = []
        self.index: dict = {}
        self.width = width

    def unit(self, row: np.ndarray, b: float) -> int:
        key = (row.tobytes(), float(b))
        if key not in self.index:
            self.index[key] = len(self.rows)
            self.rows.append(row)
            self.bias.append(b)
        return self.index[key]

    def layer(self) -> Layer:
        if not self.rows:
            return Layer(np.zeros((1, self.width)), np.zeros(1), ActivationKind.RELU)
        return Layer(np.array(self.rows), np.array(self.bias), ActivationKind.RELU)

    @property
    def size(self) -> int:
        return max(len(self.rows), 1)


def bound_network(net: FeedforwardNetwork, box: Box, n_per_region: int) -> BoundedNetworkPair:
    """Upper and lower ReLU networks sandwiching ``net`` on ``box``.

    Both networks carry two streams, an upper and a lower estimate of every
    neuron.  Positive weights read the same-side stream, negative weights the
    opposite one, and each stream applies its own monotone activation bound.
    The two networks share all hidden layers and differ only in the head.
    """
    if net.is_piecewise_linear:
        return BoundedNetworkPair(net, net, net, n_per_region, box)
    ibp = propagate_box(net, box)
    n0 = net.n_inputs
    layers: list[Layer] = []
    # upper/lower streams as affine maps of the current hidden vector h
    Au, au = np.eye(n0), np.zeros(n0)
    Al, al = np.eye(n0), np.zeros(n0)
    for li, layer in enumerate(net.layers):
        W, b, act = layer.weights, layer.bias, layer.activation
        Wp, Wn = np.maximum(W, 0.0), np.minimum(W, 0.0)
        Zu, zu = Wp @ Au + Wn @ Al, Wp @ au + Wn @ al + b
        Zl, zl = Wp @ Al + Wn @ Au, Wp @ al + Wn @ au + b
        if act is ActivationKind.IDENTITY:
            Au, au, Al, al = Zu, zu, Zl, zl
            continue
        width = Zu.shape[1]
        hb = _HiddenLayerBuilder(width)
        terms_u: list = []  # per neuron: list of (unit, weight), offset
        terms_l: list = []
        lo, hi = _widen(ibp.pre_lower[li], ibp.pre_upper[li], act)
        for k in range(W.shape[0]):
            if act is ActivationKind.RELU:
                # exact; a neuron that is never active is the constant 0
                for Z, z, terms in ((Zu, zu, terms_u), (Zl, zl, terms_l)):
                    units = [] if hi[k] <= 0 else [(hb.unit(Z[k], z[k]), 1.0)]
                    terms.append((units, 0.0))
                continue
            up, low = bound_activation(act, Interval(float(lo[k]), float(hi[k])), n_per_region)
            for pl, Z, z, terms in ((up, Zu, zu, terms_u), (low, Zl, zl, terms_l)):
                kinks, scales, signs = relu_units(pl)
                units = []
                for kink, s, sg in zip(kinks, scales, signs):
                    # ReLU(s (z - kink)) = s ReLU(z - kink): scale moves to the output
                    units.append((hb.unit(Z[k], z[k] - kink), sg * s))
                terms.append((units, float(pl.values[0])))
        m = hb.size
        new = []
        for terms in (terms_u, terms_l):
            A = np.zeros((W.shape[0], m))
            a = np.zeros(W.shape[0])
            for k, (units, offset) in enumerate(terms):
                for u, w in units:
                    A[k, u] += w
                a[k] = offset
            new.append((A, a))
        layers.append(hb.layer())
        (Au, au), (Al, al) = new
    upper = FeedforwardNetwork(layers + [Layer(Au, au, ActivationKind.IDENTITY)])
    lower = FeedforwardNetwork(layers + [Layer(Al, al, ActivationKind.IDENTITY)])
    return BoundedNetworkPair(upper, lower, net, n_per_region, box)


# ---------------------------------------------------------------------------
# gadget subnetworks


def _net(*specs) -> FeedforwardNetwork:
    return FeedforwardNetwork([Layer(W, b, a) for W, b, a in specs])


def gadget(kind: str, arity: int = 1) -> tuple[FeedforwardNetwork, bool]:
    """Subnetwork for ``kind`` and a flag telling whether it is exact ReLU.

    Non-exact gadgets contain a monotone nonlinear stage (``square``,
    ``exp``, ``log``) that ``bound_network`` can relax.
    """
    R, I = ActivationKind.RELU, ActivationKind.IDENTITY
    expected = {"abs": 1, "square": 1, "product": 2, "max": 2}
    if kind in expected and arity != expected[kind]:
        raise ValueError(f"{kind} gadget takes {expected[kind]} input(s), got {arity}")
    if kind == "abs":
        return _net(([[1.0], [-1.0]], [0, 0], R), ([[1.0, 1.0]], [0], I)), True
    if kind == "max":
        # max(x1, x2) = (x1 + x2 + |x1 - x2|) / 2
        W = [[1, 1], [-1, -1], [1, -1], [-1, 1]]
        return _net((W, [0] * 4, R), ([[0.5, -0.5, 0.5, 0.5]], [0], I)), True
    if kind == "square":
        return _net(([[1.0], [-1.0]], [0, 0], R), ([[1.0, 1.0]], [0], ActivationKind.SQUARE)), False
    if kind == "product":
        # x1 x2 = ((x1 + x2)^2 - x1^2 - x2^2) / 2, squares taken of |.|
        W = [[1, 1], [-1, -1], [1, 0], [-1, 0], [0, 1], [0, -1]]
        pair = [[1, 1, 0, 0, 0, 0], [0, 0, 1, 1, 0, 0], [0, 0, 0, 0, 1, 1]]
        return _net((W, [0] * 6, R), (pair, [0] * 3, ActivationKind.SQUARE), ([[0.5, -0.5, -0.5]], [0], I)), False
    if kind == "softmax_log":
        if arity < 1:
            raise ValueError("softmax_log needs at least one input")
        n = arity
        logs = np.vstack([np.eye(n), np.ones((1, n))])
        diff = np.hstack([np.eye(n), -np.ones((n, 1))])
        return _net(
            (np.eye(n), np.zeros(n), ActivationKind.EXP),
            (logs, np.zeros(n + 1), ActivationKind.LOG),
            (diff, np.zeros(n), I),
        ), False
    raise ValueError(f"unsupported gadget kind {kind!r}")
