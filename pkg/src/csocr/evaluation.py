"""Repeated hold-out evaluation of compressive features + OvO SVMs.

One run draws a fresh Bernoulli matrix and a fresh stratified split,
trains on the training part and scores the held-out part.  Run ``r`` of a
repeated evaluation uses matrix seed ``base_seed + 2r`` and split seed
``base_seed + 2r + 1``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .classifier import TrainConfig, train_ovo_ecoc
from .datasets import LabeledDataset
from .sensing import bernoulli_matrix, measure_batch


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    classes: Tuple[int, ...]
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        k = len(self.classes)
        if c.shape != (k, k) or np.any(c < 0):
            raise ValueError("confusion counts must be a non-negative K x K array")
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_labels(cls, classes: Sequence[int], true, predicted) -> "ConfusionMatrix":
        index = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for t, p in zip(true, predicted):
            if int(t) not in index or int(p) not in index:
                raise ValueError(f"label pair ({t}, {p}) outside classes {list(classes)}")
            counts[index[int(t)], index[int(p)]] += 1
        return cls(tuple(classes), counts)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred"] + list(self.classes))
        for label, row in zip(self.classes, self.counts):
            w.writerow([label] + row.tolist())
        return buf.getvalue()


@dataclass(frozen=True)
class ClassMetrics:
    """Per-class scores in percent.

    ``degenerate`` marks a row where precision, recall or F1 was undefined
    (zero denominator) and reported as 0.
    """

    label: int
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


def _pct(num, den) -> Tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return 100.0 * num / den, False


def metrics_from_confusion(cm: ConfusionMatrix) -> Tuple[List[ClassMetrics], float]:
    """Per-class precision / recall / F1 and overall accuracy, in percent."""
    if cm.total < 1:
        raise ValueError("confusion matrix is empty")
    counts = cm.counts
    out = []
    for k, label in enumerate(cm.classes):
        tp = counts[k, k]
        precision, bad_p = _pct(tp, counts[:, k].sum())
        recall, bad_r = _pct(tp, counts[k, :].sum())
        if precision + recall > 0:
            f1, bad_f = 2 * precision * recall / (precision + recall), False
        else:
            f1, bad_f = 0.0, True
        out.append(ClassMetrics(label, precision, recall, f1,
                                bad_p or bad_r or bad_f))
    accuracy = 100.0 * np.trace(counts) / cm.total
    return out, float(accuracy)


def split(ds: LabeledDataset, spec: SplitSpec) -> Tuple[LabeledDataset, LabeledDataset]:
    """Seeded hold-out split.

    Stratified: each class sends ``floor(f * n + 0.5)`` samples to the
    training side, and both sides must receive at least one sample per
    class.  Unstratified: the same rounding on the whole dataset.
    """
    train_idx, test_idx = split_indices(ds.labels, ds.classes, spec)
    return ds.subset(train_idx), ds.subset(test_idx)


def _n_train(fraction: float, n: int) -> int:
    return int(math.floor(fraction * n + 0.5))


def split_indices(labels: np.ndarray, classes: Sequence[int],
                  spec: SplitSpec) -> Tuple[List[int], List[int]]:
    rng = np.random.default_rng(spec.seed)
    labels = np.asarray(labels)
    train, test = [], []
    if spec.stratified:
        for c in classes:
            idx = np.flatnonzero(labels == c)
            n_tr = _n_train(spec.train_fraction, idx.size)
            if n_tr < 1 or idx.size - n_tr < 1:
                raise ValueError(
                    f"class {c} with {idx.size} samples cannot be split "
                    f"at train fraction {spec.train_fraction}")
            perm = rng.permutation(idx)
            train.extend(perm[:n_tr].tolist())
            test.extend(perm[n_tr:].tolist())
    else:
        n_tr = _n_train(spec.train_fraction, labels.size)
        if n_tr < 1 or labels.size - n_tr < 1:
            raise ValueError("dataset too small to split")
        perm = rng.permutation(labels.size)
        train, test = perm[:n_tr].tolist(), perm[n_tr:].tolist()
    return sorted(train), sorted(test)


def evaluate_once(ds: LabeledDataset, m: int, matrix_seed: int,
                  split_seed: int, train_cfg: TrainConfig = TrainConfig(),
                  train_fraction: float = 0.8, stratified: bool = True,
                  on_train: bool = False) -> Tuple[ConfusionMatrix, float]:
    """Measure, split, train and score once.

    ``on_train=True`` scores the training part instead of the held-out
    part (a sanity upper bound).
    """
    signals = ds.signals()
    A = bernoulli_matrix(m, signals.shape[1], matrix_seed)
    features = measure_batch(A, signals)
    labels = ds.labels
    tr, te = split_indices(labels, ds.classes,
                           SplitSpec(train_fraction, split_seed, stratified))
    model = train_ovo_ecoc(features[tr], labels[tr], train_cfg)
    eval_idx = tr if on_train else te
    predicted = model.predict(features[eval_idx])
    cm = ConfusionMatrix.from_labels(ds.classes, labels[eval_idx], predicted)
    _, accuracy = metrics_from_confusion(cm)
    return cm, accuracy


@dataclass(frozen=True, eq=False)
class RunReport:
    runs: int
    per_run_accuracy: Tuple[float, ...]
    mean_accuracy: float
    min_accuracy: float
    max_accuracy: float
    per_class: Tuple[ClassMetrics, ...]
    confusion: Tuple[ConfusionMatrix, ...] = ()
    config_echo: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "per_run_accuracy": list(self.per_run_accuracy),
            "mean_accuracy": self.mean_accuracy,
            "min_accuracy": self.min_accuracy,
            "max_accuracy": self.max_accuracy,
            "per_class": [asdict(c) for c in self.per_class],
            "confusion_matrices": [cm.counts.tolist() for cm in self.confusion],
            "classes": list(self.confusion[0].classes) if self.confusion else [],
            "config": self.config_echo,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        """Per-class table (label, precision, recall, f1) with accuracy
        footer rows."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "precision", "recall", "f1"])
        for c in self.per_class:
            w.writerow([c.label, f"{c.precision:.3f}", f"{c.recall:.3f}",
                        f"{c.f1:.3f}"])
        w.writerow(["mean_accuracy", f"{self.mean_accuracy:.3f}", "", ""])
        w.writerow(["min_accuracy", f"{self.min_accuracy:.3f}", "", ""])
        w.writerow(["max_accuracy", f"{self.max_accuracy:.3f}", "", ""])
        return buf.getvalue()

    def accuracy_csv(self) -> str:
        lines = ["run,accuracy"]
        lines += [f"{r},{a!r}" for r, a in enumerate(self.per_run_accuracy)]
        return "\n".join(lines) + "\n"


def _run(args):
    ds, m, r, base_seed, cfg, fraction, stratified = args
    return evaluate_once(ds, m, base_seed + 2 * r, base_seed + 2 * r + 1,
                         cfg, fraction, stratified)


def aggregate(results: Sequence[Tuple[ConfusionMatrix, float]],
              config_echo: Optional[dict] = None) -> RunReport:
    """Average run results in run order; per-class rows are unweighted
    means of per-run percentages."""
    accs = [acc for _, acc in results]
    per_run = [metrics_from_confusion(cm)[0] for cm, _ in results]
    classes = results[0][0].classes
    per_class = []
    for k, label in enumerate(classes):
        rows = [pr[k] for pr in per_run]
        per_class.append(ClassMetrics(
            label=label,
            precision=float(np.mean([r.precision for r in rows])),
            recall=float(np.mean([r.recall for r in rows])),
            f1=float(np.mean([r.f1 for r in rows])),
            degenerate=any(r.degenerate for r in rows)))
    return RunReport(runs=len(results), per_run_accuracy=tuple(accs),
                     mean_accuracy=float(np.mean(accs)),
                     min_accuracy=float(min(accs)),
                     max_accuracy=float(max(accs)),
                     per_class=tuple(per_class),
                     confusion=tuple(cm for cm, _ in results),
                     config_echo=dict(config_echo or {}))


def repeated_eval(ds: LabeledDataset, m: int, runs: int = 20,
                  base_seed: int = 0, train_cfg: TrainConfig = TrainConfig(),
                  train_fraction: float = 0.8, stratified: bool = True,
                  jobs: int = 1, dataset_info: Optional[dict] = None) -> RunReport:
    """Run :func:`evaluate_once` ``runs`` times with the seed schedule
    described in the module docstring.  ``jobs > 1`` fans runs out to
    worker processes; the result does not depend on ``jobs``."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    tasks = [(ds, m, r, base_seed, train_cfg, train_fraction, stratified)
             for r in range(runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run, tasks))
    else:
        results = [_run(t) for t in tasks]
    echo = {
        "m": m,
        "runs": runs,
        "base_seed": base_seed,
        "train_fraction": train_fraction,
        "stratified": stratified,
        "train_config": asdict(train_cfg),
        "dataset": dict(dataset_info or {}, size=len(ds),
                        classes=list(ds.classes)),
    }
    return aggregate(results, echo)
