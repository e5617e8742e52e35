"""Random +/-1 measurement matrices, compressive measurements, and
restricted isometry diagnostics for small matrices."""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .imaging import SignalVector


class ResourceLimitError(RuntimeError):
    """Raised when an exhaustive enumeration would exceed its budget."""


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    """An ``m x N`` matrix with entries in {-1, +1}.

    Generated from numpy's PCG64 stream seeded with ``seed``; entries are
    drawn in row-major order.
    """

    entries: np.ndarray
    seed: int = 0

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2:
            raise ValueError("measurement matrix must be 2-D")
        m, n = a.shape
        if not 1 <= m <= n:
            raise ValueError(f"need 1 <= m <= N, got m={m}, N={n}")
        if not np.all(np.abs(a) == 1.0):
            raise ValueError("entries must be +1 or -1")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def N(self) -> int:
        return self.entries.shape[1]

    def __eq__(self, other):
        if not isinstance(other, MeasurementMatrix):
            return NotImplemented
        return self.seed == other.seed and np.array_equal(self.entries,
                                                          other.entries)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    matrix_seed: int = 0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class RicEstimate:
    s: int
    delta: float
    support_count: int


def bernoulli_matrix(m: int, N: int, seed: int) -> MeasurementMatrix:
    """Draw an ``m x N`` matrix of independent fair +/-1 entries."""
    if not 1 <= m <= N:
        raise ValueError(f"need 1 <= m <= N, got m={m}, N={N}")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(m, N), dtype=np.int8)
    return MeasurementMatrix(2.0 * bits - 1.0, seed=seed)


def _values(x) -> np.ndarray:
    if isinstance(x, (SignalVector, FeatureVector)):
        return x.values
    return np.asarray(x, dtype=float)


def measure(A: MeasurementMatrix, x) -> FeatureVector:
    """Compute the measurement ``y = A x``."""
    v = _values(x)
    if v.ndim != 1 or v.size != A.N:
        raise ValueError(
            f"signal length {v.size} does not match matrix width {A.N}")
    return FeatureVector(A.entries @ v, matrix_seed=A.seed)


def measure_batch(A: MeasurementMatrix, signals: np.ndarray) -> np.ndarray:
    """Measure every row of ``signals`` (shape ``n x N``); returns ``n x m``."""
    X = np.asarray(signals, dtype=float)
    if X.ndim != 2 or X.shape[1] != A.N:
        raise ValueError(
            f"signals of shape {X.shape} do not match matrix width {A.N}")
    return X @ A.entries.T


def min_measurements(s: int, N: int, C: float = 1.0) -> int:
    """Measurement count ``max(s, ceil(C s ln(N/s)))`` for s-sparse recovery."""
    if not 1 <= s <= N:
        raise ValueError(f"need 1 <= s <= N, got s={s}, N={N}")
    if C <= 0:
        raise ValueError("C must be positive")
    return max(s, math.ceil(C * s * math.log(N / s)))


def estimate_ric(A: MeasurementMatrix, s: int,
                 max_supports: int = 100_000) -> RicEstimate:
    """Exact s-th restricted isometry constant of ``A / sqrt(m)``.

    Every s-column submatrix is visited, so this only makes sense for
    tiny matrices (N up to ~16, s up to ~3).
    """
    if not 1 <= s <= A.N:
        raise ValueError(f"need 1 <= s <= N, got s={s}")
    n_supports = math.comb(A.N, s)
    if n_supports > max_supports:
        raise ResourceLimitError(
            f"C({A.N}, {s}) = {n_supports} supports exceeds budget "
            f"{max_supports}; reduce N or s")
    An = A.entries / math.sqrt(A.m)
    gram = An.T @ An
    delta = 0.0
    for support in itertools.combinations(range(A.N), s):
        idx = np.array(support)
        eig = np.linalg.eigvalsh(gram[np.ix_(idx, idx)])
        delta = max(delta, 1.0 - eig[0], eig[-1] - 1.0)
    return RicEstimate(s=s, delta=max(delta, 0.0), support_count=n_supports)


# --- file formats -----------------------------------------------------------

def write_matrix_csv(path, A: MeasurementMatrix) -> None:
    lines = [f"# bernoulli m={A.m} N={A.N} seed={A.seed}"]
    lines += [",".join("1" if v > 0 else "-1" for v in row)
              for row in A.entries]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix_csv(path) -> MeasurementMatrix:
    path = os.fspath(path)
    seed = 0
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                fields = dict(tok.split("=", 1) for tok in line[1:].split()
                              if "=" in tok)
                seed = int(fields.get("seed", 0))
                continue
            rows.append([float(tok) for tok in line.split(",")])
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: empty or ragged matrix file")
    return MeasurementMatrix(np.array(rows), seed=seed)


def write_features_csv(path, features: np.ndarray,
                       labels: Optional[Sequence] = None) -> None:
    """One row per sample; trailing column is the label or ``?``."""
    F = np.atleast_2d(np.asarray(features, dtype=float))
    if labels is None:
        labels = ["?"] * F.shape[0]
    with open(path, "w", newline="\n") as fh:
        for row, label in zip(F, labels):
            fh.write(",".join(repr(float(v)) for v in row) + f",{label}\n")


def read_features_csv(path) -> Tuple[np.ndarray, List[Optional[int]]]:
    rows, labels = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            *vals, label = line.split(",")
            if not vals:
                raise ValueError(f"{path}:{lineno}: no feature columns")
            rows.append([float(v) for v in vals])
            labels.append(None if label.strip() == "?" else int(label))
    if not rows:
        raise ValueError(f"{path}: no samples")
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: rows have differing feature counts")
    return np.array(rows), labels


def labeled(labels: Iterable[Optional[int]]) -> bool:
    return all(lab is not None for lab in labels)
