"""SGD and Adam with coupled (L2-style) weight decay.

``step`` is pure: it returns new parameter and state arrays and leaves its
inputs untouched.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_hat: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise InvalidInputError(f"unknown optimizer {self.kind!r}")
        # lr = 0 is accepted so a run can be frozen deliberately
        if self.learning_rate < 0:
            raise InvalidInputError("learning_rate must be non-negative")
        if self.weight_decay < 0:
            raise InvalidInputError("weight_decay must be non-negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidInputError("betas must lie in [0, 1)")
        if self.epsilon_hat <= 0:
            raise InvalidInputError("epsilon_hat must be positive")


@dataclass(frozen=True, eq=False)
class OptimizerState:
    step: int
    m: np.ndarray
    v: np.ndarray | None = None


def init_state(config: OptimizerConfig, n_params: int) -> OptimizerState:
    v = np.zeros(n_params) if config.kind == "adam" else None
    return OptimizerState(0, np.zeros(n_params), v)


def step(config: OptimizerConfig, state: OptimizerState, params, grads):
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise InvalidInputError("parameter, gradient and state shapes disagree")
    if not np.all(np.isfinite(grads)):
        bad = int(np.flatnonzero(~np.isfinite(grads))[0])
        raise InvalidInputError(f"non-finite gradient entry at index {bad}")
    g = grads + config.weight_decay * params if config.weight_decay else grads
    t = state.step + 1
    if config.kind == "sgd":
        return params - config.learning_rate * g, replace(state, step=t)

    m = config.beta1 * state.m + (1.0 - config.beta1) * g
    v = config.beta2 * state.v + (1.0 - config.beta2) * (g * g)
    m_hat = m / (1.0 - config.beta1 ** t)
    v_hat = v / (1.0 - config.beta2 ** t)
    new = params - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon_hat)
    return new, OptimizerState(t, m, v)
