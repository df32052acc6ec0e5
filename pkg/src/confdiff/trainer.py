"""Minibatch empirical risk minimisation and evaluation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import risk
from .datasets import ConfDiffDataset, LabeledDataset, PcompDataset, SoftLabeledDataset, fmt_float
from .errors import AbortedRunError, ConfigError, InvalidInputError
from .losses import CorrectionKind
from .models import ModelParams, ModelSpec, backward, forward, init_model, predict
from .optim import OptimizerConfig, init_state, step
from .rng import stream
from .serialize import dumps


class Estimator(str, Enum):
    CONFDIFF_UNBIASED = "confdiff_unbiased"
    CONFDIFF_RELU = "confdiff_relu"
    CONFDIFF_ABS = "confdiff_abs"
    CONFDIFF_WEIGHTED = "confdiff_weighted"
    PCOMP_UNBIASED = "pcomp_unbiased"
    SOFT_LABEL = "soft_label"
    SUPERVISED_HARD = "supervised_hard"

    @property
    def data_type(self):
        if self.value.startswith("confdiff"):
            return ConfDiffDataset
        return {
            "pcomp_unbiased": PcompDataset,
            "soft_label": SoftLabeledDataset,
            "supervised_hard": LabeledDataset,
        }[self.value]

    @property
    def paired(self):
        return self.data_type in (ConfDiffDataset, PcompDataset)


_CORRECTION = {
    Estimator.CONFDIFF_UNBIASED: CorrectionKind.IDENTITY,
    Estimator.CONFDIFF_RELU: CorrectionKind.RELU,
    Estimator.CONFDIFF_ABS: CorrectionKind.ABS,
}


@dataclass(frozen=True)
class TrainConfig:
    estimator: Estimator = Estimator.CONFDIFF_ABS
    epochs: int = 200
    batch_pairs: int = 256
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    model: ModelSpec = field(default_factory=ModelSpec)
    seed: int = 0
    eval_tail_epochs: int = 10
    alpha: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        if not self.epochs >= self.eval_tail_epochs >= 1:
            raise ConfigError("need epochs >= eval_tail_epochs >= 1")
        if self.batch_pairs < 1:
            raise ConfigError("batch_pairs must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")


@dataclass
class RunResult:
    train_risk: list
    test_accuracy: list
    final_accuracy: float
    min_train_risk: float
    estimator: str = ""
    seed: int = 0
    params: ModelParams | None = field(default=None, repr=False, compare=False)

    def to_dict(self):
        return {
            "estimator": self.estimator,
            "seed": self.seed,
            "epochs": len(self.train_risk),
            "final_accuracy": self.final_accuracy,
            "min_train_risk": self.min_train_risk,
            "train_risk": list(self.train_risk),
            "test_accuracy": list(self.test_accuracy),
        }

    def to_json(self):
        return dumps(self.to_dict())

    def to_lines(self):
        """``epoch,train_risk,test_accuracy`` per line, then a ``#summary`` line."""
        lines = ["#epoch,train_risk,test_accuracy"]
        for i, (r, a) in enumerate(zip(self.train_risk, self.test_accuracy), start=1):
            lines.append(f"{i},{fmt_float(r)},{fmt_float(a)}")
        lines.append(
            f"#summary estimator={self.estimator} seed={self.seed} "
            f"final_accuracy={fmt_float(self.final_accuracy)} min_train_risk={fmt_float(self.min_train_risk)}"
        )
        return "\n".join(lines) + "\n"


def check_config(train_data, config: TrainConfig):
    expected = config.estimator.data_type
    if not isinstance(train_data, expected):
        raise ConfigError(
            f"estimator {config.estimator.value} needs {expected.__name__}, got {type(train_data).__name__}"
        )
    if train_data.dim != config.model.input_dim:
        raise ConfigError(f"model input_dim {config.model.input_dim} != data dimension {train_data.dim}")


def evaluate_accuracy(params: ModelParams, test_data: LabeledDataset) -> float:
    if len(test_data) == 0:
        raise InvalidInputError("empty test set")
    pred = np.where(predict(params, test_data.x) >= 0, 1.0, -1.0)
    return float(np.mean(pred == test_data.y))


def _scores(params, data):
    if isinstance(data, (ConfDiffDataset, PcompDataset)):
        n = len(data)
        s = predict(params, np.concatenate([data.x, data.x_prime]))
        return s[:n], s[n:]
    return predict(params, data.x)


def training_risk(params: ModelParams, data, config: TrainConfig) -> float:
    """The configured objective evaluated on ``data`` as a single batch."""
    est = config.estimator
    scores = _scores(params, data)
    if est in _CORRECTION:
        return risk.confdiff_corrected_risk(data, scores, correction=_CORRECTION[est])
    if est is Estimator.CONFDIFF_WEIGHTED:
        return risk.confdiff_weighted_risk(data, scores, alpha=config.alpha)
    if est is Estimator.PCOMP_UNBIASED:
        return risk.pcomp_unbiased_risk(data, scores)
    if est is Estimator.SOFT_LABEL:
        return risk.soft_label_risk(data, scores)
    return risk.supervised_risk(data, scores)


def _batch_gradient(params, batch, config):
    est = config.estimator
    if est.paired:
        n = len(batch)
        score, cache = forward(params, np.concatenate([batch.x, batch.x_prime]))
        s, sp = score[:n], score[n:]
        if est in _CORRECTION:
            gs, gsp = risk.corrected_risk_grad(batch, (s, sp), _CORRECTION[est])
        elif est is Estimator.CONFDIFF_WEIGHTED:
            gs, gsp = risk.weighted_risk_grad(batch, (s, sp), config.alpha)
        else:
            gs, gsp = risk.pcomp_risk_grad(batch, (s, sp))
        upstream = np.concatenate([gs, gsp])
    else:
        score, cache = forward(params, batch.x)
        if est is Estimator.SOFT_LABEL:
            upstream = risk.soft_label_risk_grad(batch, score)
        else:
            upstream = risk.supervised_risk_grad(batch, score)
    return backward(params, cache, upstream)


def _batch_size(est, config):
    # batch_pairs counts pairs; pointwise sets use the same number of instances
    return config.batch_pairs if est.paired else 2 * config.batch_pairs


def epoch_batches(n, batch_size, rng):
    """Index arrays for one epoch: a fresh permutation cut into batches; the
    last partial batch is kept."""
    order = rng.permutation(n)
    return [order[start:start + batch_size] for start in range(0, n, batch_size)]


def train(train_data, test_data: LabeledDataset, config: TrainConfig, params: ModelParams | None = None) -> RunResult:
    """Train from scratch (or from ``params``) and record per-epoch risk and accuracy."""
    check_config(train_data, config)
    params = init_model(config.model) if params is None else params.copy()
    opt_state = init_state(config.optimizer, len(params))
    shuffle_rng = stream(config.seed, "shuffle")
    n = len(train_data)
    bs = _batch_size(config.estimator, config)
    risks, accs = [], []
    for epoch in range(1, config.epochs + 1):
        try:
            for idx in epoch_batches(n, bs, shuffle_rng):
                batch = train_data.subset(idx)
                grad = _batch_gradient(params, batch, config)
                flat, opt_state = step(config.optimizer, opt_state, params.flat, grad)
                params = params.replace(flat)
            r = training_risk(params, train_data, config)
        except InvalidInputError as exc:
            # non-finite scores or gradients: the run has diverged
            raise AbortedRunError(f"epoch {epoch}: {exc}", epoch=epoch) from exc
        if not math.isfinite(r):
            raise AbortedRunError(f"epoch {epoch}: non-finite training risk", epoch=epoch)
        risks.append(r)
        accs.append(evaluate_accuracy(params, test_data))
    tail = accs[-config.eval_tail_epochs:]
    return RunResult(
        train_risk=risks,
        test_accuracy=accs,
        final_accuracy=float(np.mean(tail)),
        min_train_risk=float(min(risks)),
        estimator=config.estimator.value,
        seed=config.seed,
        params=params,
    )
