"""Gaussian-mixture ground truth with exact posteriors, and the generators
for ConfDiff, Pcomp, labeled and soft-labeled data drawn from it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datasets import (
    ConfDiffDataset,
    LabeledDataset,
    PcompDataset,
    SoftLabeledDataset,
)
from .errors import InvalidInputError

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class GaussianMixtureSpec:
    """Two diagonal-covariance Gaussian classes with prior ``prior_pos`` on +1."""

    mean_pos: np.ndarray
    mean_neg: np.ndarray
    cov_diag_pos: np.ndarray
    cov_diag_neg: np.ndarray
    prior_pos: float

    def __post_init__(self):
        arrs = {}
        for name in ("mean_pos", "mean_neg", "cov_diag_pos", "cov_diag_neg"):
            a = np.atleast_1d(np.asarray(getattr(self, name), dtype=np.float64))
            if a.ndim != 1 or not np.all(np.isfinite(a)):
                raise InvalidInputError(f"{name} must be a finite vector")
            arrs[name] = a
        d = arrs["mean_pos"].shape[0]
        if any(a.shape != (d,) for a in arrs.values()):
            raise InvalidInputError("all mixture vectors must share one dimension")
        if np.any(arrs["cov_diag_pos"] <= 0) or np.any(arrs["cov_diag_neg"] <= 0):
            raise InvalidInputError("variances must be strictly positive")
        if not 0.0 < self.prior_pos < 1.0:
            raise InvalidInputError(f"prior_pos must lie in (0, 1), got {self.prior_pos}")
        for name, a in arrs.items():
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "prior_pos", float(self.prior_pos))

    @classmethod
    def isotropic(cls, mean_pos, mean_neg, var=1.0, prior_pos=0.5):
        mean_pos = np.atleast_1d(np.asarray(mean_pos, dtype=np.float64))
        ones = np.ones_like(mean_pos)
        return cls(mean_pos, mean_neg, var * ones, var * ones, prior_pos)

    @property
    def dim(self):
        return self.mean_pos.shape[0]

    @property
    def prior_neg(self):
        return 1.0 - self.prior_pos

    def with_prior(self, prior):
        return GaussianMixtureSpec(self.mean_pos, self.mean_neg, self.cov_diag_pos,
                                   self.cov_diag_neg, prior)

    def to_dict(self):
        return {
            "dim": self.dim,
            "mean_pos": self.mean_pos.tolist(),
            "mean_neg": self.mean_neg.tolist(),
            "cov_diag_pos": self.cov_diag_pos.tolist(),
            "cov_diag_neg": self.cov_diag_neg.tolist(),
            "prior_pos": self.prior_pos,
        }


@dataclass(frozen=True)
class NoiseSpec:
    prior_scale: float = 1.0
    conf_noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.prior_scale <= 0:
            raise InvalidInputError("prior_scale must be positive")
        if self.conf_noise_std < 0:
            raise InvalidInputError("conf_noise_std must be non-negative")

    @property
    def is_clean(self):
        return self.prior_scale == 1.0 and self.conf_noise_std == 0.0


def _check_x(spec, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != spec.dim:
        raise InvalidInputError(f"expected dimension {spec.dim}, got {x.shape[-1]}")
    return x


def class_log_densities(spec: GaussianMixtureSpec, x):
    """(log p+(x), log p-(x)) for a single point or a row matrix."""
    x = _check_x(spec, x)

    def logpdf(mean, var):
        return -0.5 * (np.sum((x - mean) ** 2 / var, axis=-1) + np.sum(np.log(var)) + spec.dim * _LOG_2PI)

    return logpdf(spec.mean_pos, spec.cov_diag_pos), logpdf(spec.mean_neg, spec.cov_diag_neg)


def posterior_logit(spec: GaussianMixtureSpec, x):
    lp, ln = class_log_densities(spec, x)
    return (math.log(spec.prior_pos) + lp) - (math.log(spec.prior_neg) + ln)


def posterior_positive(spec: GaussianMixtureSpec, x):
    """p(y = +1 | x) by Bayes' rule in log space. Scalar in, scalar out."""
    z = np.asarray(posterior_logit(spec, x), dtype=np.float64)
    e = np.exp(-np.abs(z))
    p = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(p) if p.ndim == 0 else p


def sample_labeled(spec: GaussianMixtureSpec, m: int, rng: np.random.Generator):
    """``m`` iid draws of (x, y): class by prior, then the class Gaussian."""
    y = np.where(rng.random(m) < spec.prior_pos, 1.0, -1.0)
    z = rng.standard_normal((m, spec.dim))
    pos = y > 0
    mean = np.where(pos[:, None], spec.mean_pos, spec.mean_neg)
    std = np.sqrt(np.where(pos[:, None], spec.cov_diag_pos, spec.cov_diag_neg))
    return mean + std * z, y


def sample_class(spec: GaussianMixtureSpec, label: int, m: int, rng: np.random.Generator):
    """``m`` draws from the class-conditional density of ``label``."""
    if label == 1:
        mean, var = spec.mean_pos, spec.cov_diag_pos
    elif label == -1:
        mean, var = spec.mean_neg, spec.cov_diag_neg
    else:
        raise InvalidInputError("label must be +1 or -1")
    return mean + np.sqrt(var) * rng.standard_normal((m, spec.dim))


def sample_unlabeled_pair(spec: GaussianMixtureSpec, rng: np.random.Generator):
    x, _ = sample_labeled(spec, 2, rng)
    return x[0], x[1]


@dataclass(frozen=True, eq=False)
class TrainingSets:
    """One draw of 2n labeled instances viewed through every supervision type.

    The ConfDiff pairs, the Pcomp pairs (reverse strategy), and the pointwise
    oracle sets all come from the same underlying instances.
    """

    confdiff: ConfDiffDataset
    pcomp: PcompDataset
    labeled: LabeledDataset
    soft: SoftLabeledDataset
    y: np.ndarray = field(repr=False)
    y_prime: np.ndarray = field(repr=False)

    def select(self, data_type):
        """The view whose container type is ``data_type``."""
        for view in (self.confdiff, self.pcomp, self.labeled, self.soft):
            if isinstance(view, data_type):
                return view
        raise InvalidInputError(f"no training view of type {data_type.__name__}")


def make_training_sets(spec: GaussianMixtureSpec, n: int, rng: np.random.Generator) -> TrainingSets:
    if n < 1:
        raise InvalidInputError("need at least one pair")
    x_all, y_all = sample_labeled(spec, 2 * n, rng)
    x, xp = x_all[:n], x_all[n:]
    y, yp = y_all[:n], y_all[n:]
    r, rp = posterior_positive(spec, x), posterior_positive(spec, xp)
    confdiff = ConfDiffDataset(x, xp, rp - r, spec.prior_pos)
    # Pcomp assumes the first slot is the more positive one: reverse (-1, +1)
    flip = (y < 0) & (yp > 0)
    px = np.where(flip[:, None], xp, x)
    pxp = np.where(flip[:, None], x, xp)
    pcomp = PcompDataset(px, pxp, spec.prior_pos, n_reversed=int(flip.sum()))
    labeled = LabeledDataset(x_all, y_all)
    soft = SoftLabeledDataset(x_all, np.concatenate([r, rp]))
    return TrainingSets(confdiff, pcomp, labeled, soft, y, yp)


def make_confdiff_dataset(spec: GaussianMixtureSpec, n: int, rng: np.random.Generator) -> ConfDiffDataset:
    """``n`` pairs with ``c_i = p(+1|x'_i) - p(+1|x_i)`` and the true prior attached."""
    return make_training_sets(spec, n, rng).confdiff


def make_pcomp_dataset(spec: GaussianMixtureSpec, n: int, rng: np.random.Generator,
                       strategy="reverse") -> PcompDataset:
    """Pcomp pairs from labeled pairs; ``(-1, +1)`` pairs are reversed or discarded."""
    if strategy == "reverse":
        return make_training_sets(spec, n, rng).pcomp
    if strategy != "discard":
        raise InvalidInputError(f"unknown Pcomp strategy {strategy!r}")
    if n < 1:
        raise InvalidInputError("need at least one pair")
    xs, xps = [], []
    kept = 0
    while kept < n:
        x_all, y_all = sample_labeled(spec, 2 * n, rng)
        keep = ~((y_all[:n] < 0) & (y_all[n:] > 0))
        xs.append(x_all[:n][keep])
        xps.append(x_all[n:][keep])
        kept += int(keep.sum())
    return PcompDataset(np.concatenate(xs)[:n], np.concatenate(xps)[:n], spec.prior_pos)


def make_labeled_dataset(spec: GaussianMixtureSpec, m: int, rng: np.random.Generator) -> LabeledDataset:
    if m < 1:
        raise InvalidInputError("need at least one example")
    x, y = sample_labeled(spec, m, rng)
    return LabeledDataset(x, y)


def corrupt_confidences(data: ConfDiffDataset, noise: NoiseSpec, rng: np.random.Generator) -> ConfDiffDataset:
    """Multiplicative noise ``c_i * N(1, sigma^2)``, clipped back into [-1, 1]."""
    if noise.conf_noise_std == 0.0:
        return data
    eps = 1.0 + noise.conf_noise_std * rng.standard_normal(len(data))
    return data.with_confidences(np.clip(eps * data.c, -1.0, 1.0))


def corrupt_prior(prior: float, noise: NoiseSpec) -> float:
    if not 0.0 < prior < 1.0:
        raise InvalidInputError(f"prior must lie in (0, 1), got {prior}")
    return min(max(noise.prior_scale * prior, 1e-3), 1.0 - 1e-3)


def bayes_accuracy(spec: GaussianMixtureSpec, rng: np.random.Generator, m=1_000_000, chunk=250_000):
    """Monte-Carlo accuracy of thresholding the true posterior at 1/2.

    Returns ``(estimate, standard_error)``.
    """
    hits = 0
    done = 0
    while done < m:
        k = min(chunk, m - done)
        x, y = sample_labeled(spec, k, rng)
        pred = np.where(posterior_logit(spec, x) >= 0, 1.0, -1.0)
        hits += int(np.sum(pred == y))
        done += k
    p = hits / m
    return p, math.sqrt(p * (1.0 - p) / m)


def normal_cdf(z):
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def linear_zero_one_risk(spec: GaussianMixtureSpec, w, b):
    """Exact 0-1 risk of ``sign(w.x + b)`` (sign(0) = +1) under the mixture.

    Within each class ``w.x + b`` is Gaussian, so each error rate is a normal CDF.
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.shape != (spec.dim,):
        raise InvalidInputError("weight dimension mismatch")

    def below_zero(mean, var):
        mu = float(w @ mean + b)
        sd = math.sqrt(float(np.sum(w * w * var)))
        if sd == 0.0:
            return 1.0 if mu < 0 else 0.0
        return normal_cdf(-mu / sd)

    err_pos = below_zero(spec.mean_pos, spec.cov_diag_pos)
    err_neg = 1.0 - below_zero(spec.mean_neg, spec.cov_diag_neg)
    return spec.prior_pos * err_pos + spec.prior_neg * err_neg


def bayes_rule_linear(spec: GaussianMixtureSpec):
    """``(w, b)`` with ``sign(w.x + b)`` the Bayes classifier, or None if the
    class covariances differ (the boundary is then quadratic)."""
    if not np.array_equal(spec.cov_diag_pos, spec.cov_diag_neg):
        return None
    var = spec.cov_diag_pos
    w = (spec.mean_pos - spec.mean_neg) / var
    b = (-0.5 * (np.sum(spec.mean_pos ** 2 / var) - np.sum(spec.mean_neg ** 2 / var))
         + math.log(spec.prior_pos / spec.prior_neg))
    return w, float(b)


def bayes_error(spec: GaussianMixtureSpec, rng=None, m=1_000_000):
    """Bayes 0-1 risk: exact for shared covariances, Monte Carlo otherwise.

    Returns ``(error, standard_error)``.
    """
    rule = bayes_rule_linear(spec)
    if rule is not None:
        return linear_zero_one_risk(spec, *rule), 0.0
    acc, se = bayes_accuracy(spec, rng, m=m)
    return 1.0 - acc, se
