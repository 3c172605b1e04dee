"""Group accuracies and their average / worst / range aggregates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model
from .model import ModelParams
from .robust import EmptyGroupError


@dataclass(frozen=True)
class MetricsReport:
    per_group_acc: np.ndarray
    counts: np.ndarray

    @property
    def average_acc(self) -> float:
        # unweighted over groups, not over samples
        return float(np.mean(self.per_group_acc))

    @property
    def worst_acc(self) -> float:
        return float(np.min(self.per_group_acc))

    @property
    def range_acc(self) -> float:
        return float(np.max(self.per_group_acc) - np.min(self.per_group_acc))

    def as_dict(self) -> dict:
        return {
            "average_acc": self.average_acc,
            "worst_acc": self.worst_acc,
            "range_acc": self.range_acc,
            "per_group_acc": [float(a) for a in self.per_group_acc],
            "counts": [int(c) for c in self.counts],
        }


def report_from_predictions(pred, y, g, n_groups: int) -> MetricsReport:
    pred = np.asarray(pred)
    y = np.asarray(y)
    g = np.asarray(g)
    acc = np.empty(n_groups)
    counts = np.empty(n_groups, dtype=np.int64)
    for k in range(n_groups):
        mask = g == k
        counts[k] = int(mask.sum())
        if counts[k] == 0:
            raise EmptyGroupError(f"group {k} has no evaluation samples")
        acc[k] = np.count_nonzero(pred[mask] == y[mask]) / counts[k]
    return MetricsReport(acc, counts)


def evaluate(params: ModelParams, test) -> MetricsReport:
    """Accuracy per group of ``test`` (anything with ``X``, ``y``, ``g``, ``n_groups``)."""
    pred = model.predict(params, test.X)
    return report_from_predictions(pred, test.y, test.g, test.n_groups)
