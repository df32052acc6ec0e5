"""Containers for the four kinds of training data and their text format.

All containers store columns as float64 arrays (one row per example or pair).
The text format is line oriented::

    #confdiff d=2 n=3 prior=5.0000000000000000e-01
    x_1,...,x_d,x'_1,...,x'_d,c

Labeled files end each row with ``+1``/``-1``, soft-labeled files with ``r``,
Pcomp files carry only ``x`` then ``x'``. Floats are written with 17
significant digits so a round trip is exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError


def _as_matrix(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-d array")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return a


def _check_prior(prior):
    if not 0.0 < prior < 1.0:
        raise InvalidInputError(f"class prior must lie in (0, 1), got {prior}")


@dataclass(frozen=True)
class ConfDiffPair:
    x: np.ndarray
    x_prime: np.ndarray
    c: float

    def __post_init__(self):
        if np.shape(self.x) != np.shape(self.x_prime):
            raise InvalidInputError("x and x_prime must have equal dimension")
        if not -1.0 <= self.c <= 1.0:
            raise InvalidInputError(f"confidence difference {self.c} outside [-1, 1]")


@dataclass(frozen=True, eq=False)
class ConfDiffDataset:
    """Unlabeled pairs ``(x_i, x'_i)`` with ``c_i = p(+1|x'_i) - p(+1|x_i)``."""

    x: np.ndarray
    x_prime: np.ndarray
    c: np.ndarray
    class_prior: float

    def __post_init__(self):
        x = _as_matrix(self.x, "x")
        xp = _as_matrix(self.x_prime, "x_prime")
        c = np.atleast_1d(np.asarray(self.c, dtype=np.float64))
        if x.shape != xp.shape:
            raise InvalidInputError("x and x_prime must share shape")
        if c.shape != (x.shape[0],):
            raise InvalidInputError("need one confidence difference per pair")
        if np.any(np.abs(c) > 1.0) or not np.all(np.isfinite(c)):
            raise InvalidInputError("confidence differences must lie in [-1, 1]")
        _check_prior(self.class_prior)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_prime", xp)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "class_prior", float(self.class_prior))

    @classmethod
    def from_pairs(cls, pairs, class_prior):
        pairs = list(pairs)
        if not pairs:
            raise InvalidInputError("need at least one pair")
        return cls(
            np.stack([np.asarray(p.x, dtype=np.float64) for p in pairs]),
            np.stack([np.asarray(p.x_prime, dtype=np.float64) for p in pairs]),
            np.array([p.c for p in pairs], dtype=np.float64),
            class_prior,
        )

    def __len__(self):
        return self.x.shape[0]

    def __getitem__(self, i):
        return ConfDiffPair(self.x[i], self.x_prime[i], float(self.c[i]))

    @property
    def dim(self):
        return self.x.shape[1]

    @property
    def pairs(self):
        return [self[i] for i in range(len(self))]

    def subset(self, idx):
        return ConfDiffDataset(self.x[idx], self.x_prime[idx], self.c[idx], self.class_prior)

    def swapped(self):
        """Every pair with roles exchanged: (x', x, -c)."""
        return ConfDiffDataset(self.x_prime, self.x, -self.c, self.class_prior)

    def with_confidences(self, c):
        return ConfDiffDataset(self.x, self.x_prime, c, self.class_prior)

    def with_prior(self, prior):
        return ConfDiffDataset(self.x, self.x_prime, self.c, prior)


@dataclass(frozen=True, eq=False)
class PcompDataset:
    """Ordered pairs where ``x`` is known to be at least as likely positive as ``x'``."""

    x: np.ndarray
    x_prime: np.ndarray
    class_prior: float
    n_reversed: int = field(default=0, compare=False)

    def __post_init__(self):
        x = _as_matrix(self.x, "x")
        xp = _as_matrix(self.x_prime, "x_prime")
        if x.shape != xp.shape:
            raise InvalidInputError("x and x_prime must share shape")
        _check_prior(self.class_prior)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_prime", xp)

    def __len__(self):
        return self.x.shape[0]

    @property
    def dim(self):
        return self.x.shape[1]

    def subset(self, idx):
        return PcompDataset(self.x[idx], self.x_prime[idx], self.class_prior)


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _as_matrix(self.x, "x")
        y = np.atleast_1d(np.asarray(self.y, dtype=np.float64))
        if y.shape != (x.shape[0],):
            raise InvalidInputError("need one label per example")
        if not np.all((y == 1.0) | (y == -1.0)):
            raise InvalidInputError("labels must be +1 or -1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.x.shape[0]

    @property
    def dim(self):
        return self.x.shape[1]

    def subset(self, idx):
        return LabeledDataset(self.x[idx], self.y[idx])


@dataclass(frozen=True, eq=False)
class SoftLabeledDataset:
    """Examples with pointwise positive confidence ``r = p(+1|x)``."""

    x: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        x = _as_matrix(self.x, "x")
        r = np.atleast_1d(np.asarray(self.r, dtype=np.float64))
        if r.shape != (x.shape[0],):
            raise InvalidInputError("need one confidence per example")
        if not np.all((r >= 0.0) & (r <= 1.0)):
            raise InvalidInputError("soft labels must lie in [0, 1]")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "r", r)

    def __len__(self):
        return self.x.shape[0]

    @property
    def dim(self):
        return self.x.shape[1]

    def subset(self, idx):
        return SoftLabeledDataset(self.x[idx], self.r[idx])


# -- text format -------------------------------------------------------------

def fmt_float(v) -> str:
    return format(float(v), ".16e")


def _write_rows(path, header, columns):
    rows = np.column_stack(columns)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(fmt_float(v) for v in row) + "\n")


def _parse_header(line, expected_kind):
    parts = line.strip().lstrip("#").split()
    if not parts or parts[0] != expected_kind:
        raise InvalidInputError(f"expected a '{expected_kind}' header, got {line.strip()!r}")
    meta = {}
    for p in parts[1:]:
        k, _, v = p.partition("=")
        meta[k] = v
    return meta


def _read_rows(path, kind):
    with open(path, encoding="ascii") as fh:
        meta = _parse_header(fh.readline(), kind)
        data = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=np.float64)
    d, n = int(meta["d"]), int(meta["n"])
    if data.shape[0] != n:
        raise InvalidInputError(f"{path}: header says n={n}, found {data.shape[0]} rows")
    return meta, d, data


def write_confdiff(path, data: ConfDiffDataset):
    header = f"#confdiff d={data.dim} n={len(data)} prior={fmt_float(data.class_prior)}"
    _write_rows(path, header, [data.x, data.x_prime, data.c])


def read_confdiff(path) -> ConfDiffDataset:
    meta, d, rows = _read_rows(path, "confdiff")
    return ConfDiffDataset(rows[:, :d], rows[:, d:2 * d], rows[:, 2 * d], float(meta["prior"]))


def write_pcomp(path, data: PcompDataset):
    header = f"#pcomp d={data.dim} n={len(data)} prior={fmt_float(data.class_prior)}"
    _write_rows(path, header, [data.x, data.x_prime])


def read_pcomp(path) -> PcompDataset:
    meta, d, rows = _read_rows(path, "pcomp")
    return PcompDataset(rows[:, :d], rows[:, d:2 * d], float(meta["prior"]))


def write_labeled(path, data: LabeledDataset):
    header = f"#labeled d={data.dim} n={len(data)}"
    rows = np.asarray(data.x)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(header + "\n")
        for xi, yi in zip(rows, data.y):
            fh.write(",".join(fmt_float(v) for v in xi) + ("," + ("+1" if yi > 0 else "-1")) + "\n")


def read_labeled(path) -> LabeledDataset:
    _, d, rows = _read_rows(path, "labeled")
    return LabeledDataset(rows[:, :d], rows[:, d])


def write_soft(path, data: SoftLabeledDataset):
    header = f"#soft d={data.dim} n={len(data)}"
    _write_rows(path, header, [data.x, data.r])


def read_soft(path) -> SoftLabeledDataset:
    _, d, rows = _read_rows(path, "soft")
    return SoftLabeledDataset(rows[:, :d], rows[:, d])


READERS = {
    "confdiff": read_confdiff,
    "pcomp": read_pcomp,
    "labeled": read_labeled,
    "soft": read_soft,
}


def read_any(path):
    """Dispatch on the header keyword."""
    with open(Path(path), encoding="ascii") as fh:
        kind = fh.readline().strip().lstrip("#").split()[0]
    if kind not in READERS:
        raise InvalidInputError(f"{path}: unknown dataset kind {kind!r}")
    return READERS[kind](path)
