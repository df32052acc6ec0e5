"""Scoring functions g: R^d -> R with explicit forward and backward passes.

Parameters live in one flat float64 vector; each layer's weight matrix
(shape ``(fan_in, fan_out)``) and bias are views into it, weights first.
A linear model is the degenerate case with no hidden layers.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidStateError
from .rng import stream


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "mlp"
    input_dim: int = 2
    hidden_widths: tuple = (64, 64, 64)
    init_seed: int = 0

    def __post_init__(self):
        if self.kind not in ("linear", "mlp"):
            raise InvalidInputError(f"unknown model kind {self.kind!r}")
        if self.input_dim < 1:
            raise InvalidInputError("input_dim must be positive")
        widths = tuple(int(w) for w in self.hidden_widths)
        if self.kind == "mlp" and (not widths or min(widths) < 1):
            raise InvalidInputError("an mlp needs at least one positive hidden width")
        object.__setattr__(self, "hidden_widths", widths if self.kind == "mlp" else ())

    def layer_shapes(self):
        sizes = [self.input_dim, *self.hidden_widths, 1]
        return [(sizes[i], sizes[i + 1]) for i in range(len(sizes) - 1)]


class ModelParams:
    def __init__(self, shapes, flat=None):
        self.shapes = [tuple(int(v) for v in s) for s in shapes]
        size = sum(i * o + o for i, o in self.shapes)
        if flat is None:
            flat = np.zeros(size)
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (size,):
            raise InvalidInputError(f"expected {size} parameters, got {flat.shape}")
        self.flat = flat

    def __len__(self):
        return self.flat.shape[0]

    @property
    def input_dim(self):
        return self.shapes[0][0]

    def layers(self, vec=None):
        """[(W, b), ...] as views into ``vec`` (defaults to the parameters)."""
        vec = self.flat if vec is None else vec
        out = []
        k = 0
        for i, o in self.shapes:
            w = vec[k:k + i * o].reshape(i, o)
            k += i * o
            out.append((w, vec[k:k + o]))
            k += o
        return out

    def replace(self, flat):
        return ModelParams(self.shapes, flat)

    def copy(self):
        return ModelParams(self.shapes, self.flat.copy())


def init_model(spec: ModelSpec, rng=None) -> ModelParams:
    """Uniform fan-based weights, zero biases."""
    rng = stream(spec.init_seed, "model-init") if rng is None else rng
    params = ModelParams(spec.layer_shapes())
    for w, _ in params.layers():
        limit = math.sqrt(6.0 / (w.shape[0] + w.shape[1]))
        w[...] = rng.uniform(-limit, limit, size=w.shape)
    return params


def _inputs(params, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise InvalidInputError(f"expected inputs of dimension {params.input_dim}, got shape {x.shape}")
    return x, single


def forward(params: ModelParams, x):
    """Scores for a point (returns a float) or a row matrix (returns an array).

    The cache holds each layer's input and the hidden pre-activations.
    """
    x, single = _inputs(params, x)
    layers = params.layers()
    acts = [x]
    pre = []
    h = x
    for w, b in layers[:-1]:
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    w, b = layers[-1]
    score = (h @ w + b)[:, 0]
    cache = {"shapes": list(params.shapes), "acts": acts, "pre": pre, "single": single}
    return (float(score[0]) if single else score), cache


def predict(params: ModelParams, x, chunk=65536):
    """Scores only, evaluated in row chunks to bound memory."""
    x, single = _inputs(params, x)
    layers = params.layers()
    out = np.empty(x.shape[0])
    for start in range(0, x.shape[0], chunk):
        h = x[start:start + chunk]
        for w, b in layers[:-1]:
            h = np.maximum(h @ w + b, 0.0)
        w, b = layers[-1]
        out[start:start + chunk] = (h @ w + b)[:, 0]
    return float(out[0]) if single else out


def backward(params: ModelParams, cache, upstream):
    """Flat gradient of ``sum_i upstream_i * g(x_i)`` with respect to the parameters."""
    if cache.get("shapes") != list(params.shapes):
        raise InvalidStateError("activation cache does not match these parameters")
    acts, pre = cache["acts"], cache["pre"]
    up = np.asarray(upstream, dtype=np.float64).reshape(-1)
    if up.shape != (acts[0].shape[0],):
        raise InvalidStateError(f"upstream has {up.shape[0]} entries, cache holds {acts[0].shape[0]} rows")
    grad = np.zeros(len(params))
    glayers = params.layers(grad)
    wlayers = params.layers()
    delta = up[:, None]
    for k in range(len(wlayers) - 1, -1, -1):
        gw, gb = glayers[k]
        gw[...] = acts[k].T @ delta
        gb[...] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ wlayers[k][0].T) * (pre[k - 1] > 0.0)
    return grad


# -- checkpoint --------------------------------------------------------------
#
# b"CDMP" | uint32 version=1 | uint32 n_layers | n_layers x (uint32 fan_in, uint32 fan_out)
# | float64 parameters (little endian, layer by layer, W row-major then b)

_MAGIC = b"CDMP"


def save_params(path, params: ModelParams):
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", 1, len(params.shapes)))
        for i, o in params.shapes:
            fh.write(struct.pack("<II", i, o))
        fh.write(params.flat.astype("<f8").tobytes())


def load_params(path) -> ModelParams:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise InvalidInputError(f"{path}: not a parameter checkpoint")
        version, n_layers = struct.unpack("<II", fh.read(8))
        if version != 1:
            raise InvalidInputError(f"{path}: unsupported checkpoint version {version}")
        shapes = [struct.unpack("<II", fh.read(8)) for _ in range(n_layers)]
        flat = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    return ModelParams(shapes, flat)
