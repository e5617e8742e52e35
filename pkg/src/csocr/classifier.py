"""Linear soft-margin SVMs and one-vs-one ECOC multiclass classification.

Binary machines are trained in the dual with sequential minimal
optimisation (SMO): at each step the maximal-violating pair is chosen
with second-order working-set selection and solved analytically.  The
bias is unregularised, i.e. the primal problem is

    minimise  0.5 * ||w||^2 + C * sum_i max(0, 1 - y_i (w . x_i + b)).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

import numba
import numpy as np

FORMAT_VERSION = 1
_TAU = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    """SVM hyperparameters.

    ``max_iterations=None`` resolves to ``10 * n_samples * n_classes``.
    ``seed`` is recorded for reproducibility; the SMO pair selection
    itself is deterministic and does not consume randomness.
    """

    c: float = 1.0
    tolerance: float = 1e-3
    max_iterations: Optional[int] = None
    seed: int = 0
    standardize: bool = False

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True, eq=False)
class SvmBinaryModel:
    weights: np.ndarray
    bias: float
    class_pair: Tuple[int, int] = (-1, 1)
    train_objective: float = 0.0
    converged: bool = True
    iterations: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.class_pair[0] == self.class_pair[1]:
            raise ValueError("class_pair labels must differ")


def _as_features(features) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D array (samples x dims)")
    return X


@numba.njit(cache=True)
def _smo(K, y, C, tol, max_iter):
    """Solve the SVM dual on a precomputed kernel matrix.

    Returns ``(alpha, b, iterations, converged)``.
    """
    n = y.size
    alpha = np.zeros(n)
    G = -np.ones(n)
    converged = False
    it = 0
    while it < max_iter:
        # maximal violating index i over I_up
        i = -1
        g_max = -np.inf
        g_min = np.inf
        for t in range(n):
            yg = -y[t] * G[t]
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                if yg > g_max:
                    g_max = yg
                    i = t
            if (y[t] < 0 and alpha[t] < C) or (y[t] > 0 and alpha[t] > 0):
                if yg < g_min:
                    g_min = yg
        if i < 0 or g_max - g_min < tol:
            converged = True
            break
        # second-order choice of j among violators in I_low
        j = -1
        best = np.inf
        for t in range(n):
            if (y[t] < 0 and alpha[t] < C) or (y[t] > 0 and alpha[t] > 0):
                b_it = g_max + y[t] * G[t]
                if b_it > 0:
                    a_it = K[i, i] + K[t, t] - 2.0 * K[i, t]
                    if a_it <= 0:
                        a_it = _TAU
                    score = -(b_it * b_it) / a_it
                    if score < best:
                        best = score
                        j = t
        if j < 0:
            converged = True
            break
        it += 1

        ai_old = alpha[i]
        aj_old = alpha[j]
        Qij = y[i] * y[j] * K[i, j]
        if y[i] != y[j]:
            quad = max(K[i, i] + K[j, j] + 2.0 * Qij, _TAU)
            delta = (-G[i] - G[j]) / quad
            diff = ai_old - aj_old
            ai = ai_old + delta
            aj = aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj = 0.0
                    ai = diff
            elif ai < 0:
                ai = 0.0
                aj = -diff
            if diff > 0:
                if ai > C:
                    ai = C
                    aj = C - diff
            elif aj > C:
                aj = C
                ai = C + diff
        else:
            quad = max(K[i, i] + K[j, j] - 2.0 * Qij, _TAU)
            delta = (G[i] - G[j]) / quad
            total = ai_old + aj_old
            ai = ai_old - delta
            aj = aj_old + delta
            if total > C:
                if ai > C:
                    ai = C
                    aj = total - C
            elif aj < 0:
                aj = 0.0
                ai = total
            if total > C:
                if aj > C:
                    aj = C
                    ai = total - C
            elif ai < 0:
                ai = 0.0
                aj = total
        alpha[i] = ai
        alpha[j] = aj
        dai = ai - ai_old
        daj = aj - aj_old
        for t in range(n):
            G[t] += y[t] * (y[i] * K[t, i] * dai + y[j] * K[t, j] * daj)

    # bias from free vectors, or the midpoint of the feasible interval
    n_free = 0
    sum_free = 0.0
    ub = np.inf
    lb = -np.inf
    for t in range(n):
        yg = y[t] * G[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            sum_free += yg
    if n_free > 0:
        rho = sum_free / n_free
    else:
        rho = 0.5 * (ub + lb)
    return alpha, -rho, it, converged


def primal_objective(w, b, X, y, C) -> float:
    margins = y * (X @ w + b)
    return float(0.5 * w @ w + C * np.maximum(0.0, 1.0 - margins).sum())


def train_binary_svm(features, labels, config: TrainConfig = TrainConfig(),
                     class_pair: Tuple[int, int] = (-1, 1),
                     n_classes: int = 2) -> SvmBinaryModel:
    """Fit a linear SVM to labels in {-1, +1}."""
    X = _as_features(features)
    y = np.asarray(labels, dtype=float).ravel()
    if y.size != X.shape[0]:
        raise ValueError(f"{y.size} labels for {X.shape[0]} samples")
    if not np.all((y == 1) | (y == -1)):
        raise ValueError("binary labels must be -1 or +1")
    if not ((y > 0).any() and (y < 0).any()):
        raise ValueError("training data must contain both labels")
    max_iter = config.max_iterations
    if max_iter is None:
        max_iter = 10 * y.size * n_classes
    alpha, b, iters, converged = _smo(np.ascontiguousarray(X @ X.T), y,
                                      float(config.c), float(config.tolerance),
                                      int(max_iter))
    w = X.T @ (alpha * y)
    return SvmBinaryModel(weights=w, bias=float(b), class_pair=class_pair,
                          train_objective=primal_objective(w, b, X, y, config.c),
                          converged=converged, iterations=iters)


def predict_binary(model: SvmBinaryModel, x) -> float:
    v = np.asarray(x, dtype=float).ravel()
    if v.size != model.weights.size:
        raise ValueError(
            f"feature length {v.size} != model dimension {model.weights.size}")
    return float(model.weights @ v + model.bias)


def ovo_coding(n_classes: int) -> np.ndarray:
    """One-vs-one code matrix: column (i, j) is -1 at row i, +1 at row j."""
    pairs = list(itertools.combinations(range(n_classes), 2))
    coding = np.zeros((n_classes, len(pairs)), dtype=int)
    for col, (i, j) in enumerate(pairs):
        coding[i, col] = -1
        coding[j, col] = 1
    return coding


@dataclass(frozen=True, eq=False)
class EcocModel:
    classes: Tuple[int, ...]
    binary_models: Tuple[SvmBinaryModel, ...]
    coding: np.ndarray
    feature_dim: int
    train_config: TrainConfig = field(default_factory=TrainConfig)
    mean: Optional[np.ndarray] = None
    scale: Optional[np.ndarray] = None

    def __post_init__(self):
        k = len(self.classes)
        if len(self.binary_models) != k * (k - 1) // 2:
            raise ValueError("expected K(K-1)/2 binary models")

    def _prepare(self, X: np.ndarray) -> np.ndarray:
        if X.shape[-1] != self.feature_dim:
            raise ValueError(
                f"feature length {X.shape[-1]} != model dimension {self.feature_dim}")
        if self.mean is not None:
            X = (X - self.mean) / self.scale
        return X

    def pair_scores(self, features) -> np.ndarray:
        """Decision values of every binary machine, shape ``n x pairs``."""
        X = self._prepare(np.atleast_2d(np.asarray(features, dtype=float)))
        W = np.array([bm.weights for bm in self.binary_models])
        b = np.array([bm.bias for bm in self.binary_models])
        return X @ W.T + b

    def decoding_losses(self, features) -> np.ndarray:
        """Hinge decoding loss per class, shape ``n x K``."""
        S = self.pair_scores(features)
        Z = S[:, None, :] * self.coding[None, :, :]
        loss = np.where(self.coding[None] != 0, np.maximum(0.0, 1.0 - Z) / 2, 0.0)
        return loss.sum(axis=2)

    def predict(self, features) -> np.ndarray:
        losses = self.decoding_losses(features)
        return np.asarray(self.classes)[np.argmin(losses, axis=1)]


def train_ovo_ecoc(features, labels, config: TrainConfig = TrainConfig()) -> EcocModel:
    """Train one linear SVM per unordered class pair.

    For the pair of class indices ``(i, j)``, ``i < j``, samples of class
    ``i`` are labelled -1 and samples of class ``j`` +1.
    """
    X = _as_features(features)
    labels = np.asarray(labels)
    if labels.size != X.shape[0]:
        raise ValueError(f"{labels.size} labels for {X.shape[0]} samples")
    classes = tuple(sorted(set(labels.tolist())))
    if len(classes) < 2:
        raise ValueError("need at least two classes to train")
    mean = scale = None
    if config.standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        X = (X - mean) / scale
    k = len(classes)
    if config.max_iterations is None:
        config_bin = TrainConfig(config.c, config.tolerance,
                                 10 * X.shape[0] * k, config.seed,
                                 config.standardize)
    else:
        config_bin = config
    models = []
    for i, j in itertools.combinations(range(k), 2):
        sel = (labels == classes[i]) | (labels == classes[j])
        y = np.where(labels[sel] == classes[j], 1.0, -1.0)
        models.append(train_binary_svm(X[sel], y, config_bin,
                                       class_pair=(classes[i], classes[j])))
    return EcocModel(classes=classes, binary_models=tuple(models),
                     coding=ovo_coding(k), feature_dim=X.shape[1],
                     train_config=config, mean=mean, scale=scale)


def predict_multiclass(model: EcocModel, x):
    """Class with the smallest hinge decoding loss; ties go to the
    earliest class in ``model.classes``."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError("predict_multiclass takes a single feature vector")
    return model.predict(v[None, :])[0].item()


# --- serialisation -----------------------------------------------------------

def model_to_dict(model: EcocModel) -> dict:
    out = {
        "format_version": FORMAT_VERSION,
        "classes": [int(c) for c in model.classes],
        "feature_dim": int(model.feature_dim),
        "coding": model.coding.tolist(),
        "models": [
            {
                "pair": [int(c) for c in bm.class_pair],
                "weights": bm.weights.tolist(),
                "bias": bm.bias,
                "train_objective": bm.train_objective,
                "converged": bm.converged,
                "iterations": bm.iterations,
            }
            for bm in model.binary_models
        ],
        "train_config": asdict(model.train_config),
    }
    if model.mean is not None:
        out["standardization"] = {"mean": model.mean.tolist(),
                                  "scale": model.scale.tolist()}
    return out


def model_from_dict(data: dict) -> EcocModel:
    if data.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format {data.get('format_version')}")
    models = tuple(
        SvmBinaryModel(weights=np.array(m["weights"], dtype=float),
                       bias=float(m["bias"]), class_pair=tuple(m["pair"]),
                       train_objective=float(m["train_objective"]),
                       converged=bool(m.get("converged", True)),
                       iterations=int(m.get("iterations", 0)))
        for m in data["models"])
    std = data.get("standardization")
    return EcocModel(
        classes=tuple(data["classes"]), binary_models=models,
        coding=np.array(data["coding"], dtype=int),
        feature_dim=int(data["feature_dim"]),
        train_config=TrainConfig(**data.get("train_config", {})),
        mean=None if std is None else np.array(std["mean"]),
        scale=None if std is None else np.array(std["scale"]))


def save_model(path, model: EcocModel) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path) -> EcocModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
