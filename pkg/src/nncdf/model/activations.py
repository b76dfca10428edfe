"""Scalar activation functions with the calculus needed for bounding.

Besides the four activations of the network file format, three
auxiliary monotone kinds (``square``, ``exp``, ``log``) exist so that
the gadget subnetworks for squares, products and log-softmax can be
expressed as chains of monotone operations.
"""

from __future__ import annotations

import enum

import numpy as np


class ActivationKind(enum.Enum):
    IDENTITY = "identity"
    RELU = "relu"
    TANH = "tanh"
    LOGISTIC = "logistic"
    # t**2 for t >= 0 and 0 otherwise; monotone on the whole line
    SQUARE = "square"
    EXP = "exp"
    # natural log, only defined for t > 0
    LOG = "log"

    @classmethod
    def parse(cls, tag: str) -> ActivationKind:
        try:
            return cls(str(tag).lower())
        except ValueError:
            raise ValueError(f"unknown activation tag {tag!r}") from None

    @property
    def is_piecewise_linear(self) -> bool:
        return self in (ActivationKind.IDENTITY, ActivationKind.RELU)

    @property
    def domain_min(self) -> float:
        return 0.0 if self is ActivationKind.LOG else -np.inf

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self is ActivationKind.IDENTITY:
            return x
        if self is ActivationKind.RELU:
            return np.maximum(x, 0.0)
        if self is ActivationKind.TANH:
            return np.tanh(x)
        if self is ActivationKind.LOGISTIC:
            return _logistic(x)
        if self is ActivationKind.SQUARE:
            r = np.maximum(x, 0.0)
            return r * r
        if self is ActivationKind.EXP:
            return np.exp(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(x)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self is ActivationKind.IDENTITY:
            return np.ones_like(x)
        if self is ActivationKind.RELU:
            return (x > 0).astype(float)
        if self is ActivationKind.TANH:
            t = np.tanh(x)
            return 1.0 - t * t
        if self is ActivationKind.LOGISTIC:
            s = _logistic(x)
            return s * (1.0 - s)
        if self is ActivationKind.SQUARE:
            return 2.0 * np.maximum(x, 0.0)
        if self is ActivationKind.EXP:
            return np.exp(x)
        return 1.0 / x

    def second_derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_piecewise_linear:
            return np.zeros_like(x)
        if self is ActivationKind.TANH:
            t = np.tanh(x)
            return -2.0 * t * (1.0 - t * t)
        if self is ActivationKind.LOGISTIC:
            s = _logistic(x)
            return s * (1.0 - s) * (1.0 - 2.0 * s)
        if self is ActivationKind.SQUARE:
            return 2.0 * (x > 0)
        if self is ActivationKind.EXP:
            return np.exp(x)
        return -1.0 / (x * x)

    def left_derivative(self, x: float) -> float:
        if self is ActivationKind.RELU:
            return 1.0 if x > 0 else 0.0
        return float(self.derivative(x))

    def right_derivative(self, x: float) -> float:
        if self is ActivationKind.RELU:
            return 1.0 if x >= 0 else 0.0
        return float(self.derivative(x))

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Inflection points and kinks (first/second derivative jumps)."""
        if self in (ActivationKind.IDENTITY, ActivationKind.EXP, ActivationKind.LOG):
            return ()
        return (0.0,)

    def is_linear_on(self, lo: float, hi: float) -> bool:
        """True when the activation is affine on ``[lo, hi]``.

        The interval must not straddle a breakpoint.
        """
        if self is ActivationKind.IDENTITY:
            return True
        if self is ActivationKind.RELU:
            return True
        if self is ActivationKind.SQUARE:
            return hi <= 0.0
        return False


def _logistic(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
