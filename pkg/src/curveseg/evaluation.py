"""Evaluation protocols: stratified cross-validation, intra-class inertia and
the adjusted Rand index."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import comb

from ._util import derive_seed, parallel_map
from .curves import LabeledCurveSet
from .errors import ConfigurationError

__all__ = [
    "EvalReport",
    "stratified_folds",
    "cross_validate",
    "intra_class_inertia",
    "adjusted_rand_index",
]

log = logging.getLogger(__name__)


@dataclass
class EvalReport:
    error_rate: float
    per_fold_rates: list
    confusion: list  # G x G, rows = true class, columns = predicted
    inertia: float | None = None
    ari: float | None = None
    folds: int = 5
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    def write_csv(self, path):
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["fold", "error_rate"])
            for i, r in enumerate(self.per_fold_rates, start=1):
                w.writerow([i, repr(r)])
            w.writerow(["mean", repr(self.error_rate)])

    def confusion_table(self) -> str:
        C = np.asarray(self.confusion)
        G = C.shape[0]
        width = max(6, len(str(C.max())) + 1)
        lines = ["true\\pred" + "".join(f"{g + 1:>{width}}" for g in range(G))]
        for g in range(G):
            lines.append(f"{g + 1:>9}" + "".join(f"{v:>{width}}" for v in C[g]))
        return "\n".join(lines)


def stratified_folds(labels, folds: int, seed: int) -> np.ndarray:
    """Fold index (0-based) for every curve; each class is shuffled and dealt
    round-robin across folds."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    out = np.empty(labels.size, dtype=int)
    offset = 0
    for g in np.unique(labels):
        idx = np.flatnonzero(labels == g)
        if idx.size < folds:
            raise ConfigurationError(
                f"class {g + 1} has {idx.size} curves, fewer than {folds} folds"
            )
        idx = rng.permutation(idx)
        # rotate so that small remainders do not always land in fold 0
        out[idx] = (np.arange(idx.size) + offset) % folds
        offset += idx.size
    return out


def _run_fold(args):
    data, method, fold_of, f, seed = args
    train = data.subset(np.flatnonzero(fold_of != f))
    test_idx = np.flatnonzero(fold_of == f)
    model = method(train, seed)
    pred = np.asarray(model.predict(data.values[test_idx]))
    return test_idx, pred


def cross_validate(data: LabeledCurveSet, method, folds: int = 5, seed: int = 0,
                   jobs: int = 1) -> EvalReport:
    """Stratified ``folds``-fold misclassification rate.

    ``method`` is called as ``method(train_set, seed)`` and must return an
    object with ``predict(values) -> labels`` (e.g. a
    :class:`~curveseg.baselines.MethodSpec`). Fold ``f`` trains with seed
    ``derive_seed(seed, f)``.
    """
    if folds < 2:
        raise ConfigurationError("need at least 2 folds")
    fold_of = stratified_folds(data.labels, folds, seed)
    tasks = [(data, method, fold_of, f, derive_seed(seed, f)) for f in range(folds)]
    results = parallel_map(_run_fold, tasks, jobs)
    G = data.num_classes
    confusion = np.zeros((G, G), dtype=int)
    rates = []
    for test_idx, pred in results:
        truth = data.labels[test_idx]
        rates.append(float(np.mean(pred != truth)))
        np.add.at(confusion, (truth, pred), 1)
    return EvalReport(float(np.mean(rates)), rates, confusion.tolist(), folds=folds, seed=seed)


def intra_class_inertia(data: LabeledCurveSet, model) -> float:
    """Sum over curves of the squared distance to their cluster's mean curve.

    Each curve is assigned to the most probable cluster of its own class
    model; single-density models have one mean curve per class.
    """
    total = 0.0
    for g in range(data.num_classes):
        X = data.values[data.labels == g]
        if X.shape[0] == 0:
            continue
        means = model.mean_curves(g)
        z = model.cluster_labels(X, g)
        total += float(np.sum((X - means[z]) ** 2))
    return total


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Adjusted Rand index between two partitions of the same items."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape:
        raise ValueError("partitions must have equal length")
    n = a.size
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    sum_cells = comb(table, 2).sum()
    sum_a = comb(table.sum(axis=1), 2).sum()
    sum_b = comb(table.sum(axis=0), 2).sum()
    total = comb(n, 2)
    expected = sum_a * sum_b / total if total else 0.0
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:
        # both partitions trivial (all singletons or one block)
        return 1.0
    return float((sum_cells - expected) / (maximum - expected))
