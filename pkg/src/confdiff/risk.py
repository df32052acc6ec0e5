"""Empirical risks for ConfDiff, Pcomp, soft-label and supervised data.

Pair estimators take ``scores`` as a tuple ``(s, s_prime)`` of arrays holding
``g(x_i)`` and ``g(x'_i)``; pointwise estimators take a single array. All
functions are pure. Gradients are returned with respect to the scores; the
trainer chains them through the model.

The ConfDiff risk is assembled from four normalised term sums::

    A = sum (pi+ - c) l(g(x), +1) / 2n      B = sum (pi- - c) l(g(x'), -1) / 2n
    C = sum (pi+ + c) l(g(x'), +1) / 2n     D = sum (pi- + c) l(g(x), -1) / 2n

so that the unbiased risk is A + B + C + D and the corrected risk applies the
correction to each term before summing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .datasets import ConfDiffDataset, LabeledDataset, PcompDataset, SoftLabeledDataset
from .errors import InvalidInputError, UnsupportedGradientError
from .losses import (
    CorrectionKind,
    LossKind,
    correct,
    correct_grad,
    loss,
    loss_array,
    loss_grad_array,
)


@dataclass(frozen=True)
class TermDecomposition:
    a_hat: float
    b_hat: float
    c_hat: float
    d_hat: float

    def as_array(self):
        return np.array([self.a_hat, self.b_hat, self.c_hat, self.d_hat])

    def total(self):
        return (self.a_hat + self.b_hat) + (self.c_hat + self.d_hat)


def _check_prior(prior):
    if not 0.0 < prior < 1.0:
        raise InvalidInputError(f"class prior must lie in (0, 1), got {prior}")


def _pair_scores(data, scores):
    s, sp = scores
    s = np.asarray(s, dtype=np.float64).reshape(-1)
    sp = np.asarray(sp, dtype=np.float64).reshape(-1)
    n = len(data)
    if n == 0:
        raise InvalidInputError("empty dataset")
    if s.shape != (n,) or sp.shape != (n,):
        raise InvalidInputError(f"expected {n} scores per slot, got {s.shape} and {sp.shape}")
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(sp))):
        raise InvalidInputError("scores must be finite")
    return s, sp


def _point_scores(data, scores):
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if len(data) == 0:
        raise InvalidInputError("empty dataset")
    if s.shape != (len(data),):
        raise InvalidInputError(f"expected {len(data)} scores, got {s.shape}")
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("scores must be finite")
    return s


def _require_logistic(kind):
    if LossKind(kind) is not LossKind.LOGISTIC:
        raise UnsupportedGradientError("gradients need the logistic loss")


# -- ConfDiff ----------------------------------------------------------------

def pair_loss_L(pair, score_x, score_xp, prior, loss_kind=LossKind.LOGISTIC):
    """(pi+ - c) l(g(x), +1) + (pi- - c) l(g(x'), -1) for one pair."""
    _check_prior(prior)
    c = float(pair.c)
    if abs(c) > 1.0:
        raise InvalidInputError(f"confidence difference {c} outside [-1, 1]")
    return (prior - c) * loss(loss_kind, score_x, 1) + (1.0 - prior - c) * loss(loss_kind, score_xp, -1)


def _term_array(data: ConfDiffDataset, s, sp, loss_kind):
    if LossKind(loss_kind) is LossKind.LOGISTIC:
        return kernels.confdiff_terms(s, sp, data.c, data.class_prior)
    pp = data.class_prior
    pn = 1.0 - pp
    c = data.c
    n2 = 2.0 * len(data)
    return np.array([
        np.sum((pp - c) * loss_array(loss_kind, s, 1)) / n2,
        np.sum((pn - c) * loss_array(loss_kind, sp, -1)) / n2,
        np.sum((pp + c) * loss_array(loss_kind, sp, 1)) / n2,
        np.sum((pn + c) * loss_array(loss_kind, s, -1)) / n2,
    ])


def confdiff_term_decomposition(batch: ConfDiffDataset, scores, loss_kind=LossKind.LOGISTIC):
    s, sp = _pair_scores(batch, scores)
    a, b, c, d = _term_array(batch, s, sp, loss_kind)
    return TermDecomposition(float(a), float(b), float(c), float(d))


def confdiff_unbiased_risk(data: ConfDiffDataset, scores, loss_kind=LossKind.LOGISTIC):
    """(1/2n) sum_i [L(x_i, x'_i) + L(x'_i, x_i)]; may be negative."""
    return confdiff_term_decomposition(data, scores, loss_kind).total()


def confdiff_weighted_risk(data: ConfDiffDataset, scores, loss_kind=LossKind.LOGISTIC, alpha=0.5):
    """(1/n) sum_i [alpha L(x_i, x'_i) + (1 - alpha) L(x'_i, x_i)]; unbiased for any alpha."""
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError(f"alpha must lie in [0, 1], got {alpha}")
    t = confdiff_term_decomposition(data, scores, loss_kind)
    return weighted_from_terms(t.a_hat, t.b_hat, t.c_hat, t.d_hat, alpha)


def weighted_from_terms(a, b, c, d, alpha):
    # mean L(x, x') = 2(A + B), mean L(x', x) = 2(C + D); scaling by 2 is exact
    return alpha * (2.0 * (a + b)) + (1.0 - alpha) * (2.0 * (c + d))


def confdiff_corrected_risk(batch: ConfDiffDataset, scores, loss_kind=LossKind.LOGISTIC,
                            correction=CorrectionKind.ABS):
    t = confdiff_term_decomposition(batch, scores, loss_kind)
    f = CorrectionKind(correction)
    return (correct(f, t.a_hat) + correct(f, t.b_hat)) + (correct(f, t.c_hat) + correct(f, t.d_hat))


def corrected_risk_grad(batch: ConfDiffDataset, scores, correction=CorrectionKind.ABS,
                        loss_kind=LossKind.LOGISTIC):
    """Gradient of the corrected risk with respect to ``(s, s_prime)``.

    Each term's score gradient is scaled by the correction's derivative at
    that term's value (0 at a kink).
    """
    _require_logistic(loss_kind)
    s, sp = _pair_scores(batch, scores)
    f = CorrectionKind(correction)
    terms = kernels.confdiff_terms(s, sp, batch.c, batch.class_prior)
    weights = [correct_grad(f, t) for t in terms]
    return kernels.confdiff_score_grad(s, sp, batch.c, batch.class_prior, weights)


def unbiased_risk_grad(data: ConfDiffDataset, scores, loss_kind=LossKind.LOGISTIC):
    _require_logistic(loss_kind)
    s, sp = _pair_scores(data, scores)
    return kernels.confdiff_score_grad(s, sp, data.c, data.class_prior, (1.0, 1.0, 1.0, 1.0))


def weighted_risk_grad(data: ConfDiffDataset, scores, alpha, loss_kind=LossKind.LOGISTIC):
    _require_logistic(loss_kind)
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError(f"alpha must lie in [0, 1], got {alpha}")
    s, sp = _pair_scores(data, scores)
    w = (2.0 * alpha, 2.0 * alpha, 2.0 * (1.0 - alpha), 2.0 * (1.0 - alpha))
    return kernels.confdiff_score_grad(s, sp, data.c, data.class_prior, w)


# -- Pcomp -------------------------------------------------------------------

def _pcomp_prior(data, prior):
    prior = data.class_prior if prior is None else prior
    _check_prior(prior)
    return prior


def pcomp_unbiased_risk(data: PcompDataset, scores, prior=None, loss_kind=LossKind.LOGISTIC):
    """(1/n) sum [l(g(x),+1) + l(g(x'),-1) - pi+ l(g(x),-1) - pi- l(g(x'),+1)]."""
    prior = _pcomp_prior(data, prior)
    s, sp = _pair_scores(data, scores)
    per_pair = (
        loss_array(loss_kind, s, 1)
        + loss_array(loss_kind, sp, -1)
        - prior * loss_array(loss_kind, s, -1)
        - (1.0 - prior) * loss_array(loss_kind, sp, 1)
    )
    return float(np.mean(per_pair))


def pcomp_risk_grad(data: PcompDataset, scores, prior=None, loss_kind=LossKind.LOGISTIC):
    _require_logistic(loss_kind)
    prior = _pcomp_prior(data, prior)
    s, sp = _pair_scores(data, scores)
    n = len(data)
    gs = (loss_grad_array(loss_kind, s, 1) - prior * loss_grad_array(loss_kind, s, -1)) / n
    gsp = (loss_grad_array(loss_kind, sp, -1) - (1.0 - prior) * loss_grad_array(loss_kind, sp, 1)) / n
    return gs, gsp


# -- pointwise ---------------------------------------------------------------

def soft_label_risk(data: SoftLabeledDataset, scores, loss_kind=LossKind.LOGISTIC):
    s = _point_scores(data, scores)
    r = data.r
    return float(np.mean(r * loss_array(loss_kind, s, 1) + (1.0 - r) * loss_array(loss_kind, s, -1)))


def soft_label_risk_grad(data: SoftLabeledDataset, scores, loss_kind=LossKind.LOGISTIC):
    _require_logistic(loss_kind)
    s = _point_scores(data, scores)
    r = data.r
    g = r * loss_grad_array(loss_kind, s, 1) + (1.0 - r) * loss_grad_array(loss_kind, s, -1)
    return g / len(data)


def supervised_risk(data: LabeledDataset, scores, loss_kind=LossKind.LOGISTIC):
    s = _point_scores(data, scores)
    return float(np.mean(loss_array(loss_kind, s, data.y)))


def supervised_risk_grad(data: LabeledDataset, scores, loss_kind=LossKind.LOGISTIC):
    _require_logistic(loss_kind)
    s = _point_scores(data, scores)
    return loss_grad_array(loss_kind, s, data.y) / len(data)

