"""Monte-Carlo checks of the ConfDiff estimators against Gaussian-mixture ground truth.

Every check draws fresh datasets from child streams split off the caller's
generator, so a report is a deterministic function of (inputs, seed).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import kernels
from .errors import InvalidInputError
from .losses import CorrectionKind, LossKind, correct, loss_array
from .models import ModelParams, ModelSpec, init_model, predict
from .parallel import run_tasks
from .rng import split, stream
from .risk import weighted_from_terms
from .synth import (
    GaussianMixtureSpec,
    NoiseSpec,
    bayes_error,
    corrupt_confidences,
    corrupt_prior,
    make_labeled_dataset,
    linear_zero_one_risk,
    make_training_sets,
    sample_class,
    sample_labeled,
)
from .trainer import Estimator, TrainConfig, train

Z_THRESHOLD = 4.0


@dataclass(frozen=True)
class MCReport:
    """Monte-Carlo estimate against a reference value.

    ``z_score`` divides by the combined standard error of estimate and
    reference; with an exact reference (``reference_stderr == 0``) that is
    just ``stderr``.
    """

    estimate: float
    stderr: float
    reference: float
    z_score: float
    trials: int
    reference_stderr: float = 0.0
    label: str = ""

    @classmethod
    def build(cls, estimate, stderr, reference, trials, reference_stderr=0.0, label=""):
        se = math.hypot(stderr, reference_stderr)
        z = (estimate - reference) / se if se > 0 else (0.0 if estimate == reference else math.inf)
        return cls(float(estimate), float(stderr), float(reference), float(z), int(trials),
                   float(reference_stderr), label)

    def to_dict(self):
        return asdict(self)


def reference_model(input_dim, hidden_widths=(64, 64, 64), seed=7, scale=2.0) -> ModelParams:
    """A fixed random MLP with weights multiplied by ``scale``.

    At the default scale the scores on unit-variance data spread over about
    +-1, so every loss term is far from the constant ln 2 of a fresh network.
    """
    params = init_model(ModelSpec("mlp", input_dim, tuple(hidden_widths), seed))
    return params.replace(params.flat * scale)


def _mean_se(values):
    values = np.asarray(values, dtype=np.float64)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def true_risk(spec: GaussianMixtureSpec, params: ModelParams, loss_kind=LossKind.LOGISTIC,
              rng=None, draws=1_000_000, chunk=250_000):
    """R(g) by Monte Carlo over fresh labeled draws: ``(risk, standard_error)``."""
    rng = stream(0, "true-risk") if rng is None else rng
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < draws:
        k = min(chunk, draws - done)
        x, y = sample_labeled(spec, k, rng)
        losses = loss_array(loss_kind, predict(params, x), y)
        total += float(losses.sum())
        total_sq += float(np.dot(losses, losses))
        done += k
    mean = total / draws
    var = max(total_sq / draws - mean * mean, 0.0) * draws / (draws - 1)
    return mean, math.sqrt(var / draws)


# -- batched trial generation -------------------------------------------------

@dataclass(frozen=True, eq=False)
class _TrialBatch:
    """``trials`` ConfDiff datasets of ``n`` pairs, stacked, with model scores."""

    c: np.ndarray  # (trials, n)
    s: np.ndarray
    sp: np.ndarray
    prior: float

    def swapped(self):
        return _TrialBatch(-self.c, self.sp, self.s, self.prior)


def _trial_batch(spec, params, n, trials, rngs):
    cs, xs, xps = [], [], []
    for r in rngs:
        sets = make_training_sets(spec, n, r)
        cs.append(sets.confdiff.c)
        xs.append(sets.confdiff.x)
        xps.append(sets.confdiff.x_prime)
    c = np.stack(cs)
    scores = predict(params, np.concatenate([np.concatenate(xs), np.concatenate(xps)]))
    m = trials * n
    return _TrialBatch(c, scores[:m].reshape(trials, n), scores[m:].reshape(trials, n), spec.prior_pos)


def _term_rows(batch: _TrialBatch, loss_kind):
    """(trials, 4) array of the normalised A, B, C, D terms per trial."""
    if LossKind(loss_kind) is LossKind.LOGISTIC:
        return kernels.confdiff_terms_rows(batch.s, batch.sp, batch.c, batch.prior)
    pp, pn, c = batch.prior, 1.0 - batch.prior, batch.c
    n2 = 2.0 * c.shape[1]
    return np.column_stack([
        ((pp - c) * loss_array(loss_kind, batch.s, 1)).sum(axis=1) / n2,
        ((pn - c) * loss_array(loss_kind, batch.sp, -1)).sum(axis=1) / n2,
        ((pp + c) * loss_array(loss_kind, batch.sp, 1)).sum(axis=1) / n2,
        ((pn + c) * loss_array(loss_kind, batch.s, -1)).sum(axis=1) / n2,
    ])


def _estimates(terms, estimator, alpha, correction):
    a, b, c, d = terms.T
    if estimator == "unbiased":
        return (a + b) + (c + d)
    if estimator == "weighted":
        return weighted_from_terms(a, b, c, d, alpha)
    if estimator == "corrected":
        f = np.vectorize(lambda z: correct(correction, z), otypes=[float])
        return (f(a) + f(b)) + (f(c) + f(d))
    raise InvalidInputError(f"unknown estimator {estimator!r}")


def mc_estimator_mean(spec: GaussianMixtureSpec, params: ModelParams, loss_kind=LossKind.LOGISTIC,
                      estimator="unbiased", n=200, trials=2000, rng=None, alpha=0.5,
                      correction=CorrectionKind.ABS, reference=None, reference_draws=1_000_000):
    """Mean of an estimator over ``trials`` fresh datasets, compared to R(g).

    ``reference`` may be passed as ``(risk, stderr)`` to reuse a true-risk run.
    """
    if trials < 100:
        raise InvalidInputError("need at least 100 trials")
    rng = stream(0, "mc-estimator") if rng is None else rng
    children = split(rng, trials + 1)
    if reference is None:
        reference = true_risk(spec, params, loss_kind, children[-1], draws=reference_draws)
    batch = _trial_batch(spec, params, n, trials, children[:trials])
    values = _estimates(_term_rows(batch, loss_kind), estimator, alpha, CorrectionKind(correction))
    est, se = _mean_se(values)
    label = estimator if estimator != "corrected" else f"corrected-{CorrectionKind(correction).value}"
    return MCReport.build(est, se, reference[0], trials, reference[1], label)


LEMMA4_LABELS = (
    "E[(pi+ - c) l(g(x),+1)] = pi+ E+[l(g(x),+1)]",
    "E[(pi- + c) l(g(x),-1)] = pi- E-[l(g(x),-1)]",
    "E[(pi+ + c) l(g(x'),+1)] = pi+ E+[l(g(x'),+1)]",
    "E[(pi- - c) l(g(x'),-1)] = pi- E-[l(g(x'),-1)]",
)


def check_lemma4(spec: GaussianMixtureSpec, params: ModelParams, loss_kind=LossKind.LOGISTIC,
                 trials=2000, n=500, rng=None, swap=False):
    """The four coefficient-weighted loss identities, one report each.

    Left sides average over ConfDiff pairs (per trial, then across trials);
    right sides use ``trials * n`` draws from each class-conditional density.
    ``swap=True`` evaluates the left sides on role-swapped pairs.
    """
    if trials < 100:
        raise InvalidInputError("need at least 100 trials")
    rng = stream(0, "lemma4") if rng is None else rng
    children = split(rng, trials + 2)
    batch = _trial_batch(spec, params, n, trials, children[:trials])
    if swap:
        batch = batch.swapped()
    pp, pn, c = spec.prior_pos, spec.prior_neg, batch.c
    lhs_rows = [
        ((pp - c) * loss_array(loss_kind, batch.s, 1)).mean(axis=1),
        ((pn + c) * loss_array(loss_kind, batch.s, -1)).mean(axis=1),
        ((pp + c) * loss_array(loss_kind, batch.sp, 1)).mean(axis=1),
        ((pn - c) * loss_array(loss_kind, batch.sp, -1)).mean(axis=1),
    ]
    m = trials * n
    pos = loss_array(loss_kind, predict(params, sample_class(spec, 1, m, children[-2])), 1)
    neg = loss_array(loss_kind, predict(params, sample_class(spec, -1, m, children[-1])), -1)
    rhs = [
        (pp * pos.mean(), pp * pos.std(ddof=1) / math.sqrt(m)),
        (pn * neg.mean(), pn * neg.std(ddof=1) / math.sqrt(m)),
    ]
    reports = []
    for k, row in enumerate(lhs_rows):
        est, se = _mean_se(row)
        ref, ref_se = rhs[k % 2]
        reports.append(MCReport.build(est, se, ref, trials, ref_se, LEMMA4_LABELS[k]))
    return reports


@dataclass
class VarianceProfile:
    alphas: list
    variances: list
    quadratic_coef: float
    fitted_coef: float
    mu1: float
    mu2: float
    samples: int
    unbiased_values: np.ndarray = field(repr=False, default=None)
    alpha_half_values: np.ndarray = field(repr=False, default=None)

    def to_dict(self):
        return {
            "alphas": list(self.alphas),
            "variances": list(self.variances),
            "quadratic_coef": self.quadratic_coef,
            "fitted_coef": self.fitted_coef,
            "mu1": self.mu1,
            "mu2": self.mu2,
            "samples": self.samples,
        }


def variance_profile(spec: GaussianMixtureSpec, params: ModelParams, loss_kind=LossKind.LOGISTIC,
                     alpha_grid=tuple(k / 10 for k in range(11)), n=200, trials=2000, rng=None):
    """Sample variance of the alpha-weighted estimator across a grid of weights.

    All weights see the same datasets (common random numbers), and each
    dataset also enters with its pairs role-swapped. Swapping maps the weight
    ``alpha`` to ``1 - alpha`` and leaves the data distribution unchanged, so the
    pooled sample is still valid while the profile becomes exactly symmetric.
    """
    alphas = [float(a) for a in alpha_grid]
    if 0.5 not in alphas:
        raise InvalidInputError("alpha grid must contain 0.5")
    if trials < 1000:
        raise InvalidInputError("need at least 1000 trials")
    rng = stream(0, "variance") if rng is None else rng
    batch = _trial_batch(spec, params, n, trials, split(rng, trials))
    terms = _term_rows(batch, loss_kind)
    terms = np.concatenate([terms, terms[:, [2, 3, 0, 1]]])  # swapped copy: A<->C, B<->D
    a, b, c, d = terms.T
    variances = []
    half = None
    for alpha in alphas:
        vals = weighted_from_terms(a, b, c, d, alpha)
        if alpha == 0.5:
            half = vals
        variances.append(float(np.var(vals, ddof=1)))
    forward_mean = 2.0 * (a + b)  # (1/n) sum L(x, x')
    backward_mean = 2.0 * (c + d)  # (1/n) sum L(x', x)
    mu1 = float(np.mean(forward_mean ** 2))
    mu2 = float(np.mean(forward_mean * backward_mean))
    cov = np.cov(forward_mean, backward_mean)
    quad = 2.0 * (cov[0, 0] - cov[0, 1])
    design = np.column_stack([(np.asarray(alphas) - 0.5) ** 2, np.ones(len(alphas))])
    fitted = float(np.linalg.lstsq(design, np.asarray(variances), rcond=None)[0][0])
    return VarianceProfile(alphas, variances, float(quad), fitted, mu1, mu2, terms.shape[0],
                           (a + b) + (c + d), half)


# -- training studies ---------------------------------------------------------

def _seed_config(base: TrainConfig, seed: int):
    return replace(base, seed=seed, model=replace(base.model, init_seed=seed))


def _excess_run(spec, n, base, seed, study_seed, test_size, bayes_err):
    sets = make_training_sets(spec, n, stream(study_seed, "convergence-data", n, seed))
    test = make_labeled_dataset(spec, test_size, stream(study_seed, "convergence-test"))
    cfg = _seed_config(base, seed)
    result = train(sets.select(cfg.estimator.data_type), test, cfg)
    params = result.params
    if cfg.model.kind == "linear":
        w, b = params.layers()[0]
        err = linear_zero_one_risk(spec, w[:, 0], float(b[0]))
    else:
        err, _ = true_risk(spec, params, LossKind.ZERO_ONE, stream(study_seed, "convergence-risk", n, seed))
    # deviation |empirical objective - true logistic risk| at the learned model
    logistic, _ = true_risk(spec, params, LossKind.LOGISTIC, stream(study_seed, "convergence-gap", n, seed))
    gap = abs(result.train_risk[-1] - logistic)
    return err - bayes_err, gap


@dataclass
class ConvergenceReport:
    n_grid: list
    mean_excess: list
    stderr_excess: list
    slope: float
    mean_gap: list
    gap_slope: float
    bayes_error: float
    seeds: int

    @property
    def strictly_decreasing(self):
        return all(a > b for a, b in zip(self.mean_excess, self.mean_excess[1:]))

    def to_dict(self):
        d = asdict(self)
        d["strictly_decreasing"] = self.strictly_decreasing
        return d


def _loglog_slope(ns, values):
    values = np.asarray(values, dtype=np.float64)
    if np.any(values <= 0):
        return math.nan
    return float(np.polyfit(np.log(ns), np.log(values), 1)[0])


def convergence_study(spec: GaussianMixtureSpec, n_grid, base_config: TrainConfig, seeds=10,
                      study_seed=0, test_size=1000, jobs=1):
    """Mean excess 0-1 risk over Bayes for each training-set size, plus the log-log slope."""
    n_grid = [int(v) for v in n_grid]
    if len(n_grid) < 3 or any(a >= b for a, b in zip(n_grid, n_grid[1:])):
        raise InvalidInputError("n_grid must be strictly increasing with at least 3 points")
    if n_grid[-1] < 16 * n_grid[0]:
        raise InvalidInputError("n_grid must span at least a factor of 16")
    bayes_err, _ = bayes_error(spec, stream(study_seed, "convergence-bayes"))
    tasks = [(spec, n, base_config, s, study_seed, test_size, bayes_err) for n in n_grid for s in range(seeds)]
    out = np.array(run_tasks(_excess_run, tasks, jobs)).reshape(len(n_grid), seeds, 2)
    excess, gaps = out[:, :, 0], out[:, :, 1]
    means = excess.mean(axis=1)
    ses = excess.std(axis=1, ddof=1) / math.sqrt(seeds) if seeds > 1 else np.zeros(len(n_grid))
    gap_means = gaps.mean(axis=1)
    return ConvergenceReport(n_grid, means.tolist(), ses.tolist(), _loglog_slope(n_grid, means),
                             gap_means.tolist(), _loglog_slope(n_grid, gap_means), bayes_err, seeds)


def _robust_run(spec, n, base, seed, cell, eps, sigma, study_seed, test_size):
    sets = make_training_sets(spec, n, stream(study_seed, "robust-data", seed))
    test = make_labeled_dataset(spec, test_size, stream(study_seed, "robust-test"))
    noise = NoiseSpec(eps, sigma, study_seed)
    clean = sets.confdiff
    noisy = corrupt_confidences(clean, noise, stream(study_seed, "robust-noise", seed, cell))
    noisy = noisy.with_prior(corrupt_prior(clean.class_prior, noise))
    result = train(noisy, test, _seed_config(base, seed))
    result.params = None
    c_err = float(np.mean(np.abs(noisy.c - clean.c)))
    return result, c_err, abs(noisy.class_prior - clean.class_prior)


def _plain_run(spec, n, base, seed, study_seed, test_size):
    sets = make_training_sets(spec, n, stream(study_seed, "robust-data", seed))
    test = make_labeled_dataset(spec, test_size, stream(study_seed, "robust-test"))
    result = train(sets.confdiff, test, _seed_config(base, seed))
    result.params = None
    return result


@dataclass
class RobustnessCell:
    prior_scale: float
    conf_noise_std: float
    mean_accuracy: float
    stderr_accuracy: float
    mean_abs_conf_error: float
    prior_error: float
    accuracies: list


@dataclass
class RobustnessReport:
    cells: list
    passthrough_exact: bool
    soft_checks: dict

    def cell(self, eps, sigma):
        for c in self.cells:
            if c.prior_scale == eps and c.conf_noise_std == sigma:
                return c
        raise KeyError((eps, sigma))

    def to_dict(self):
        return {
            "cells": [asdict(c) for c in self.cells],
            "passthrough_exact": self.passthrough_exact,
            "soft_checks": self.soft_checks,
        }


def robustness_study(spec: GaussianMixtureSpec, noise_grid, base_config: TrainConfig, seeds=5,
                     n=1000, study_seed=0, test_size=5000, jobs=1):
    """Final accuracy across a grid of (prior scale, confidence-noise std) corruptions.

    Hard result: the clean cell reproduces plain training bit for bit.
    Everything else is reported under ``soft_checks`` and never raises.
    """
    grid = [(float(e), float(s)) for e, s in noise_grid]
    if (1.0, 0.0) not in grid:
        raise InvalidInputError("noise grid must include the clean point (1.0, 0.0)")
    if not base_config.estimator.value.startswith("confdiff"):
        raise InvalidInputError("robustness study needs a ConfDiff estimator")
    tasks = [(spec, n, base_config, s, k, e, sg, study_seed, test_size)
             for k, (e, sg) in enumerate(grid) for s in range(seeds)]
    runs = run_tasks(_robust_run, tasks, jobs)
    cells = []
    for k, (e, sg) in enumerate(grid):
        chunk = runs[k * seeds:(k + 1) * seeds]
        accs = [r.final_accuracy for r, _, _ in chunk]
        se = float(np.std(accs, ddof=1) / math.sqrt(seeds)) if seeds > 1 else 0.0
        cells.append(RobustnessCell(e, sg, float(np.mean(accs)), se,
                                    float(np.mean([ce for _, ce, _ in chunk])),
                                    float(np.mean([pe for _, _, pe in chunk])), accs))
    clean_k = grid.index((1.0, 0.0))
    plain = _plain_run(spec, n, base_config, 0, study_seed, test_size)
    clean_run = runs[clean_k * seeds][0]
    exact = plain.train_risk == clean_run.train_risk and plain.test_accuracy == clean_run.test_accuracy
    return RobustnessReport(cells, bool(exact), _soft_checks(cells))


def _soft_checks(cells):
    clean = next(c for c in cells if c.prior_scale == 1.0 and c.conf_noise_std == 0.0)
    below = []
    for c in cells:
        tol = 3.0 * math.hypot(clean.stderr_accuracy, c.stderr_accuracy)
        if c.mean_accuracy > clean.mean_accuracy + tol:
            below.append([c.prior_scale, c.conf_noise_std])
    out = {"clean_not_dominated_by": below, "clean_within_top": not below}
    prior_cells = [c for c in cells if c.prior_scale != 1.0 and c.conf_noise_std == 0.0]
    sigma_cells = [c for c in cells if c.prior_scale == 1.0 and c.conf_noise_std == 0.2]
    if prior_cells and sigma_cells:
        drop_prior = clean.mean_accuracy - min(c.mean_accuracy for c in prior_cells)
        drop_sigma = clean.mean_accuracy - sigma_cells[0].mean_accuracy
        out["prior_drop_exceeds_sigma02_drop"] = bool(drop_prior > drop_sigma)
        out["prior_drop"] = drop_prior
        out["sigma02_drop"] = drop_sigma
    return out
