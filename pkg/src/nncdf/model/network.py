from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DimensionError
from .activations import ActivationKind


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _frozen(np.atleast_1d(self.lower), 1, "box lower")
        hi = _frozen(np.atleast_1d(self.upper), 1, "box upper")
        if lo.shape != hi.shape:
            raise DimensionError("box lower/upper length mismatch")
        if np.any(lo > hi):
            raise ValueError("box lower must not exceed upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, n: int) -> Box:
        return cls(np.zeros(n), np.ones(n))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, X, tol: float = 0.0) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.all((X >= self.lower - tol) & (X <= self.upper + tol), axis=1)

    def corners(self) -> np.ndarray:
        n = self.dim
        bits = (np.arange(2**n)[:, None] >> np.arange(n)) & 1
        return np.where(bits == 1, self.upper, self.lower)

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """``(A, b)`` with the box equal to ``{x : A x <= b}``."""
        eye = np.eye(self.dim)
        return np.vstack([eye, -eye]), np.concatenate([self.upper, -self.lower])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Box)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))

    def __repr__(self):
        return f"Box(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


@dataclass(frozen=True, eq=False)
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: ActivationKind = ActivationKind.IDENTITY

    def __post_init__(self):
        W = _frozen(self.weights, 2, "weights")
        b = _frozen(self.bias, 1, "bias")
        if W.shape[0] != b.shape[0]:
            raise DimensionError(f"weights have {W.shape[0]} rows but bias has {b.shape[0]} entries")
        act = self.activation
        if not isinstance(act, ActivationKind):
            act = ActivationKind.parse(act)
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "activation", act)

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Layer)
            and self.activation is other.activation
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.bias, other.bias)
        )

    __hash__ = None


class FeedforwardNetwork:
    """A chain of dense layers ``x -> act(W x + b)``.

    Instances are immutable; arrays are stored read-only.
    """

    def __init__(self, layers: Sequence[Layer]):
        layers = tuple(layers)
        if not layers:
            raise ValueError("a network needs at least one layer")
        for i in range(1, len(layers)):
            if layers[i].n_in != layers[i - 1].n_out:
                raise DimensionError(
                    f"layer {i} expects {layers[i].n_in} inputs but layer {i - 1} "
                    f"produces {layers[i - 1].n_out}"
                )
        self._layers = layers

    @classmethod
    def from_arrays(cls, weights, biases, activations) -> FeedforwardNetwork:
        return cls([Layer(W, b, a) for W, b, a in zip(weights, biases, activations)])

    @property
    def layers(self) -> tuple[Layer, ...]:
        return self._layers

    @property
    def n_inputs(self) -> int:
        return self._layers[0].n_in

    @property
    def n_outputs(self) -> int:
        return self._layers[-1].n_out

    @property
    def widths(self) -> list[int]:
        return [self.n_inputs] + [layer.n_out for layer in self._layers]

    @property
    def is_piecewise_linear(self) -> bool:
        return all(layer.activation.is_piecewise_linear for layer in self._layers)

    def __len__(self) -> int:
        return len(self._layers)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        H = np.atleast_2d(X)
        if H.shape[1] != self.n_inputs:
            raise DimensionError(f"network expects {self.n_inputs} inputs, got {H.shape[1]}")
        for layer in self._layers:
            H = layer.activation(H @ layer.weights.T + layer.bias)
        return H[0] if single else H

    def forward_all(self, X) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-layer ``(pre_activation, post_activation)`` for a batch."""
        H = np.atleast_2d(np.asarray(X, dtype=float))
        out = []
        for layer in self._layers:
            Z = H @ layer.weights.T + layer.bias
            H = layer.activation(Z)
            out.append((Z, H))
        return out

    def select_output(self, index: int) -> FeedforwardNetwork:
        """Same network restricted to one output component."""
        if not 0 <= index < self.n_outputs:
            raise IndexError(f"output component {index} out of range for {self.n_outputs} outputs")
        last = self._layers[-1]
        head = Layer(last.weights[index : index + 1], last.bias[index : index + 1], last.activation)
        return FeedforwardNetwork(self._layers[:-1] + (head,))

    def __eq__(self, other) -> bool:
        return isinstance(other, FeedforwardNetwork) and self._layers == other._layers

    __hash__ = None

    def __repr__(self):
        arch = "-".join(str(w) for w in self.widths)
        acts = ",".join(layer.activation.value for layer in self._layers)
        return f"FeedforwardNetwork({arch}; {acts})"


@dataclass(frozen=True)
class BoxPropagation:
    """Interval bounds for every neuron, layer by layer."""

    pre_lower: list[np.ndarray]
    pre_upper: list[np.ndarray]
    post_lower: list[np.ndarray]
    post_upper: list[np.ndarray]
    output: Box

    def pre_interval(self, layer: int, neuron: int) -> Interval:
        return Interval(float(self.pre_lower[layer][neuron]), float(self.pre_upper[layer][neuron]))

    def post_interval(self, layer: int, neuron: int) -> Interval:
        return Interval(float(self.post_lower[layer][neuron]), float(self.post_upper[layer][neuron]))


def affine_interval(W: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Image interval of ``W x + b`` for ``x`` in the box ``[lo, hi]``."""
    Wp = np.maximum(W, 0.0)
    Wn = np.minimum(W, 0.0)
    return Wp @ lo + Wn @ hi + b, Wp @ hi + Wn @ lo + b


def propagate_box(net: FeedforwardNetwork, box: Box) -> BoxPropagation:
    if box.dim != net.n_inputs:
        raise DimensionError(f"box has dimension {box.dim}, network expects {net.n_inputs}")
    lo, hi = box.lower, box.upper
    pre_lo, pre_hi, post_lo, post_hi = [], [], [], []
    for layer in net.layers:
        zl, zu = affine_interval(layer.weights, layer.bias, lo, hi)
        # every supported activation is nondecreasing
        lo, hi = layer.activation(zl), layer.activation(zu)
        pre_lo.append(zl)
        pre_hi.append(zu)
        post_lo.append(lo)
        post_hi.append(hi)
    return BoxPropagation(pre_lo, pre_hi, post_lo, post_hi, Box(lo, hi))
