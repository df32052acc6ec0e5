"""Binary losses, their derivatives, and the risk-correction functions.

Scalar functions follow the textbook signatures ``loss(kind, z, y)``; the
``*_array`` variants are the vectorised forms used by the estimators.
"""
from __future__ import annotations

import math
from enum import Enum

import numpy as np

from .errors import InvalidInputError, UnsupportedGradientError


class LossKind(str, Enum):
    LOGISTIC = "logistic"
    ZERO_ONE = "zero_one"


class CorrectionKind(str, Enum):
    IDENTITY = "identity"
    RELU = "relu"
    ABS = "abs"


def _check_label(y):
    if y != 1 and y != -1:
        raise InvalidInputError(f"label must be +1 or -1, got {y!r}")


def _softplus_neg(m: float) -> float:
    # ln(1 + exp(-m)) without overflow for either sign of m
    return math.log1p(math.exp(-abs(m))) + max(-m, 0.0)


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def loss(kind: LossKind, z: float, y: int) -> float:
    """Loss of score ``z`` against label ``y``; the margin is ``y * z``."""
    kind = LossKind(kind)
    _check_label(y)
    if not math.isfinite(z):
        raise InvalidInputError(f"score must be finite, got {z!r}")
    if kind is LossKind.LOGISTIC:
        return _softplus_neg(y * z)
    pred = 1 if z >= 0 else -1
    return 0.0 if pred == y else 1.0


def loss_grad(kind: LossKind, z: float, y: int) -> float:
    """d loss / d z. Only the logistic loss is differentiable."""
    kind = LossKind(kind)
    if kind is not LossKind.LOGISTIC:
        raise UnsupportedGradientError(f"no gradient for {kind.value} loss")
    _check_label(y)
    if not math.isfinite(z):
        raise InvalidInputError(f"score must be finite, got {z!r}")
    return -y * _sigmoid(-y * z)


def correct(kind: CorrectionKind, z: float) -> float:
    kind = CorrectionKind(kind)
    if kind is CorrectionKind.RELU:
        return max(0.0, z)
    if kind is CorrectionKind.ABS:
        return abs(z)
    return z


def correct_grad(kind: CorrectionKind, z: float) -> float:
    """Derivative of :func:`correct`; kinks at zero take subgradient 0."""
    kind = CorrectionKind(kind)
    if kind is CorrectionKind.RELU:
        return 1.0 if z > 0 else 0.0
    if kind is CorrectionKind.ABS:
        if z > 0:
            return 1.0
        return -1.0 if z < 0 else 0.0
    return 1.0


# -- vectorised forms --------------------------------------------------------

def sigmoid_array(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def logistic_margin_array(m):
    """ln(1 + exp(-m)) elementwise, stable for any finite m."""
    m = np.asarray(m, dtype=np.float64)
    return np.log1p(np.exp(-np.abs(m))) + np.maximum(-m, 0.0)


def loss_array(kind: LossKind, z, y):
    """Elementwise loss; ``y`` may be a scalar label or an array of labels."""
    kind = LossKind(kind)
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("scores must be finite")
    if kind is LossKind.LOGISTIC:
        return logistic_margin_array(y * z)
    pred = np.where(z >= 0, 1.0, -1.0)
    return (pred != y).astype(np.float64)


def loss_grad_array(kind: LossKind, z, y):
    kind = LossKind(kind)
    if kind is not LossKind.LOGISTIC:
        raise UnsupportedGradientError(f"no gradient for {kind.value} loss")
    z = np.asarray(z, dtype=np.float64)
    return -y * sigmoid_array(-y * z)
