"""Binary classification from pairwise confidence differences.

Risk estimators (unbiased, weighted, corrected), Gaussian-mixture ground
truth with exact posteriors, a small numpy model zoo, training, and a
Monte-Carlo harness that checks the estimators' statistical properties.
"""
from .datasets import (
    ConfDiffDataset,
    ConfDiffPair,
    LabeledDataset,
    PcompDataset,
    SoftLabeledDataset,
)
from .errors import (
    AbortedRunError,
    ConfDiffError,
    ConfigError,
    InvalidInputError,
    InvalidStateError,
    UnsupportedGradientError,
)
from .kernels import BACKEND
from .losses import CorrectionKind, LossKind
from .models import ModelParams, ModelSpec
from .optim import OptimizerConfig
from .synth import GaussianMixtureSpec, NoiseSpec
from .trainer import Estimator, RunResult, TrainConfig

__version__ = "0.1.0"
