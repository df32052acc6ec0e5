"""Experiment configuration: one YAML/JSON document, validated strictly.

Physical quantities (mixture means, variances, prior, dataset sizes) have no
defaults and must be spelled out; optimizer and protocol knobs default to the
values in the training protocol. Unknown keys are rejected at every level.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .models import ModelSpec
from .optim import OptimizerConfig
from .synth import GaussianMixtureSpec, NoiseSpec
from .trainer import Estimator, TrainConfig

ESTIMATORS = tuple(e.value for e in Estimator)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class MixtureConfig(_Strict):
    mean_pos: list[float]
    mean_neg: list[float]
    cov_diag_pos: list[float]
    cov_diag_neg: list[float]
    prior_pos: float = Field(gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _dims(self):
        d = len(self.mean_pos)
        if d == 0 or any(len(v) != d for v in (self.mean_neg, self.cov_diag_pos, self.cov_diag_neg)):
            raise ValueError("mixture vectors must be non-empty and share one dimension")
        if min(self.cov_diag_pos + self.cov_diag_neg) <= 0:
            raise ValueError("variances must be positive")
        return self

    def build(self) -> GaussianMixtureSpec:
        return GaussianMixtureSpec(self.mean_pos, self.mean_neg, self.cov_diag_pos,
                                   self.cov_diag_neg, self.prior_pos)


class DataConfig(_Strict):
    n_pairs: int = Field(ge=1)
    n_test: int = Field(ge=1)
    pcomp_strategy: Literal["reverse", "discard"] = "reverse"


class ModelConfig(_Strict):
    kind: Literal["linear", "mlp"] = "mlp"
    hidden_widths: list[int] = [64, 64, 64]


class OptimizerSection(_Strict):
    kind: Literal["sgd", "adam"] = "adam"
    learning_rate: float = Field(1e-3, ge=0.0)
    weight_decay: float = Field(1e-5, ge=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    epsilon_hat: float = Field(1e-8, gt=0.0)

    def build(self):
        return OptimizerConfig(**self.model_dump())


class TrainSection(_Strict):
    estimator: Literal[ESTIMATORS]
    epochs: int = Field(200, ge=1)
    batch_pairs: int = Field(256, ge=1)
    eval_tail_epochs: int = Field(10, ge=1)
    seeds: int = Field(5, ge=1)
    alpha: float = Field(0.5, ge=0.0, le=1.0)
    data_dir: Optional[str] = None
    model: ModelConfig = ModelConfig()
    optimizer: OptimizerSection = OptimizerSection()

    @model_validator(mode="after")
    def _tail(self):
        if self.eval_tail_epochs > self.epochs:
            raise ValueError("eval_tail_epochs cannot exceed epochs")
        return self

    def build(self, input_dim, seed=0, estimator=None, **overrides) -> TrainConfig:
        kw = dict(
            estimator=estimator or self.estimator,
            epochs=self.epochs,
            batch_pairs=self.batch_pairs,
            eval_tail_epochs=self.eval_tail_epochs,
            alpha=self.alpha,
            optimizer=self.optimizer.build(),
            model=ModelSpec(self.model.kind, input_dim, tuple(self.model.hidden_widths), seed),
            seed=seed,
        )
        kw.update(overrides)
        return TrainConfig(**kw)


class NoiseSection(_Strict):
    prior_scale: float = Field(1.0, gt=0.0)
    conf_noise_std: float = Field(0.0, ge=0.0)

    def build(self, seed=0):
        return NoiseSpec(self.prior_scale, self.conf_noise_std, seed)


class ConvergenceSection(_Strict):
    n_grid: list[int] = [100, 400, 1600, 6400]
    seeds: int = Field(10, ge=1)
    estimator: Literal[ESTIMATORS] = "confdiff_unbiased"
    model_kind: Literal["linear", "mlp"] = "linear"
    epochs: int = Field(200, ge=1)
    batch_pairs: int = Field(64, ge=1)
    learning_rate: float = Field(1e-2, gt=0.0)
    test_size: int = Field(1000, ge=1)
    slope_band: tuple[float, float] = (-0.75, -0.25)


class RobustnessSection(_Strict):
    prior_scales: list[float] = [0.8, 1.0, 1.2]
    conf_noise_stds: list[float] = [0.0, 0.2, 0.4]
    seeds: int = Field(5, ge=1)
    estimator: Literal["confdiff_unbiased", "confdiff_relu", "confdiff_abs"] = "confdiff_abs"
    n_pairs: int = Field(1000, ge=1)
    epochs: int = Field(200, ge=1)
    test_size: int = Field(5000, ge=1)


class VerifySection(_Strict):
    trials: int = Field(2000, ge=100)
    n_unbiased: int = Field(200, ge=1)
    n_lemma4: int = Field(500, ge=1)
    n_variance: int = Field(200, ge=1)
    variance_trials: int = Field(2000, ge=1000)
    reference_draws: int = Field(1_000_000, ge=1000)
    weighted_alpha: float = Field(0.3, ge=0.0, le=1.0)
    alpha_grid: list[float] = [k / 10 for k in range(11)]
    model_seed: int = 7
    model_hidden_widths: list[int] = [64, 64, 64]
    weight_scale: float = Field(2.0, gt=0.0)
    z_threshold: float = Field(4.0, gt=0.0)
    convergence: ConvergenceSection = ConvergenceSection()
    robustness: RobustnessSection = RobustnessSection()

    @field_validator("alpha_grid")
    @classmethod
    def _half(cls, v):
        if 0.5 not in v or any(not 0.0 <= a <= 1.0 for a in v):
            raise ValueError("alpha_grid must lie in [0, 1] and contain 0.5")
        return v


class SweepSection(_Strict):
    axis: Literal["n_fraction", "prior", "alpha", "noise"]
    values: list = []
    prior_scales: list[float] = []
    conf_noise_stds: list[float] = []
    estimators: list[Literal[ESTIMATORS]] = []

    def cells(self):
        if self.axis == "noise":
            if self.values:
                return [tuple(float(x) for x in v) for v in self.values]
            return [(e, s) for e in self.prior_scales for s in self.conf_noise_stds]
        return [(float(v),) for v in self.values]


class ExperimentConfig(_Strict):
    seed: int = Field(ge=0, lt=2 ** 64)
    mixture: MixtureConfig
    data: DataConfig
    train: TrainSection
    noise: NoiseSection = NoiseSection()
    verify: VerifySection = VerifySection()
    sweep: Optional[SweepSection] = None

    @property
    def dim(self):
        return len(self.mixture.mean_pos)


def _deep_merge(base, over):
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def preset_names():
    return sorted(p.name[:-5] for p in resources.files(__package__).joinpath("presets").iterdir()
                  if p.name.endswith(".yaml"))


def load_preset(name):
    path = resources.files(__package__).joinpath("presets", f"{name}.yaml")
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return yaml.safe_load(path.read_text()) or {}


def load_config(path=None, preset=None, seed=None) -> ExperimentConfig:
    """Preset document, overlaid by the config file, overlaid by ``seed``."""
    if path is None and preset is None:
        raise ConfigError("need --config and/or --preset")
    doc = load_preset(preset) if preset else {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            loaded = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a mapping")
        doc = _deep_merge(doc, loaded)
    if seed is not None:
        doc["seed"] = seed
    try:
        return ExperimentConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
