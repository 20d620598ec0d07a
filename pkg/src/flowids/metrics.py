"""Confusion counts and binary classification metrics.

Malicious (label 1) is the positive class. A prediction is malicious when
its probability is >= the threshold. Any ratio whose denominator is zero
is reported as 0.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def swapped(self) -> "ConfusionCounts":
        """Counts with benign treated as the positive class."""
        return ConfusionCounts(tp=self.tn, fp=self.fn, tn=self.tp, fn=self.fp)


def _ratio(num, den) -> float:
    return num / den if den else 0.0


def confusion(probabilities, labels, threshold=0.5) -> ConfusionCounts:
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels)
    if p.shape != y.shape or p.ndim != 1:
        raise ValueError(f"probabilities {p.shape} and labels {y.shape} must be equal-length vectors")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    pred = p >= threshold
    actual = y == 1
    return ConfusionCounts(
        tp=int(np.sum(pred & actual)),
        fp=int(np.sum(pred & ~actual)),
        tn=int(np.sum(~pred & ~actual)),
        fn=int(np.sum(~pred & actual)),
    )


def precision(c: ConfusionCounts) -> float:
    return _ratio(c.tp, c.tp + c.fp)


def recall(c: ConfusionCounts) -> float:
    return _ratio(c.tp, c.tp + c.fn)


def f1(c: ConfusionCounts) -> float:
    p, r = precision(c), recall(c)
    return _ratio(2 * p * r, p + r)


def f1_from_counts(c: ConfusionCounts) -> float:
    return _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn)


def weighted_f1(supports, scores) -> float:
    """Support-weighted mean of per-class F1 scores."""
    n = sum(supports)
    return _ratio(sum(s * f for s, f in zip(supports, scores)), n)


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1_malicious: float
    f1_benign: float
    f1_weighted: float
    support_malicious: int
    support_benign: int
    counts: ConfusionCounts

    def as_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "counts"}
        d.update(asdict(self.counts))
        return d

    def to_text(self) -> str:
        lines = []
        for key, value in self.as_dict().items():
            lines.append(f"{key}={value:.6f}" if isinstance(value, float) else f"{key}={value}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def report(counts: ConfusionCounts) -> MetricsReport:
    """Accuracy, malicious-positive precision/recall/F1, per-class F1 and the
    support-weighted F1."""
    n = counts.total
    support_mal = counts.tp + counts.fn
    support_ben = counts.tn + counts.fp
    f1_mal = f1(counts)
    f1_ben = f1(counts.swapped())
    weighted = weighted_f1((support_mal, support_ben), (f1_mal, f1_ben))
    return MetricsReport(
        accuracy=_ratio(counts.tp + counts.tn, n),
        precision=precision(counts),
        recall=recall(counts),
        f1_malicious=f1_mal,
        f1_benign=f1_ben,
        f1_weighted=weighted,
        support_malicious=support_mal,
        support_benign=support_ben,
        counts=counts,
    )
