"""Exact binary-classification metrics.

Everything is rank based and evaluated in float64 with no binning. Tied
scores are handled as blocks: midranks for AUROC, a single cut-point for the
ROC and precision-recall sweeps.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import UndefinedMetricError


@dataclass(frozen=True)
class ScoredSample:
    score: float
    label: int
    id: str = ""

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score}")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


def unzip(samples):
    """``(scores, labels)`` arrays from a sequence of :class:`ScoredSample`."""
    scores = np.array([s.score for s in samples], dtype=np.float64)
    labels = np.array([s.label for s in samples], dtype=np.int64)
    return scores, labels


def _validate(scores, labels, metric, need_pos=True, need_neg=True):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.size} scores vs {labels.size} labels")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    labels = labels.astype(np.int64)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if need_pos and n_pos == 0:
        raise UndefinedMetricError(metric, "no positive samples")
    if need_neg and n_neg == 0:
        raise UndefinedMetricError(metric, "no negative samples")
    return scores, labels, n_pos, n_neg


def midranks(values):
    """1-based ranks with ties sharing the mean of their positions."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    n = values.size
    # start index of each tie block in sorted order
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    ends = np.r_[starts[1:], n]
    block_rank = (starts + 1 + ends) / 2.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(block_rank, ends - starts)
    return ranks


def auroc(scores, labels):
    """Mann-Whitney AUROC with midrank tie handling."""
    scores, labels, n_pos, n_neg = _validate(scores, labels, "auroc")
    rank_sum = midranks(scores)[labels == 1].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _sweep(scores, labels):
    """Cumulative (tp, fp) at each distinct score, highest score first."""
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = labels[order]
    block_end = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(y)[block_end]
    fp = np.cumsum(1 - y)[block_end]
    return tp, fp, s[block_end]


def roc_curve(scores, labels):
    """``[(fpr, tpr), ...]`` from (0, 0) to (1, 1), one point per distinct score."""
    scores, labels, n_pos, n_neg = _validate(scores, labels, "roc_curve")
    tp, fp, _ = _sweep(scores, labels)
    return [(0.0, 0.0)] + [(float(f / n_neg), float(t / n_pos)) for t, f in zip(tp, fp)]


def trapezoid_area(points):
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def pr_curve(scores, labels):
    """``[(recall, precision), ...]`` starting at (0, 1), one point per distinct score."""
    scores, labels, n_pos, _ = _validate(scores, labels, "pr_curve", need_neg=False)
    tp, fp, _ = _sweep(scores, labels)
    return [(0.0, 1.0)] + [(float(t / n_pos), float(t / (t + f))) for t, f in zip(tp, fp)]


def auprc(scores, labels):
    """Average precision: sum over score blocks of recall gain times precision."""
    scores, labels, n_pos, _ = _validate(scores, labels, "auprc", need_neg=False)
    tp, fp, _ = _sweep(scores, labels)
    total = 0.0
    prev_tp = 0
    for t, f in zip(tp, fp):
        if t != prev_tp:
            total += ((t - prev_tp) / n_pos) * (t / (t + f))
        prev_tp = t
    return float(total)


@dataclass(frozen=True)
class Confusion:
    sensitivity: float
    specificity: float
    tp: int
    fp: int
    tn: int
    fn: int


def confusion_at(scores, labels, threshold):
    """Counts and rates when predicting positive for ``score >= threshold``."""
    scores, labels, n_pos, n_neg = _validate(scores, labels, "confusion", False, False)
    pred = scores >= threshold
    tp = int(np.sum(pred & (labels == 1)))
    fp = int(np.sum(pred & (labels == 0)))
    tn = n_neg - fp
    fn = n_pos - tp
    if n_pos == 0:
        raise UndefinedMetricError("sensitivity", "no positive samples (tp + fn = 0)")
    if n_neg == 0:
        raise UndefinedMetricError("specificity", "no negative samples (tn + fp = 0)")
    return Confusion(tp / n_pos, tn / n_neg, tp, fp, tn, fn)


@dataclass
class MetricsReport:
    auroc: float
    auprc: float
    sensitivity: float
    specificity: float
    threshold: float
    n_pos: int
    n_neg: int
    roc: list = field(default_factory=list)
    pr: list = field(default_factory=list)
    auprc_estimator: str = "average_precision"

    def to_dict(self):
        d = asdict(self)
        d["roc"] = [list(p) for p in self.roc]
        d["pr"] = [list(p) for p in self.pr]
        keys = ("auroc", "auprc", "sensitivity", "specificity", "threshold", "n_pos", "n_neg",
                "auprc_estimator", "roc", "pr")
        return {k: d[k] for k in keys}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"


REPORT_SCHEMA = {
    "type": "object",
    "required": ["auroc", "auprc", "sensitivity", "specificity", "threshold", "n_pos", "n_neg",
                 "auprc_estimator", "roc", "pr"],
    "additionalProperties": False,
    "properties": {
        "auroc": {"type": "number", "minimum": 0, "maximum": 1},
        "auprc": {"type": "number", "minimum": 0, "maximum": 1},
        "sensitivity": {"type": "number", "minimum": 0, "maximum": 1},
        "specificity": {"type": "number", "minimum": 0, "maximum": 1},
        "threshold": {"type": "number"},
        "n_pos": {"type": "integer", "minimum": 1},
        "n_neg": {"type": "integer", "minimum": 1},
        "auprc_estimator": {"const": "average_precision"},
        "roc": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                           "minItems": 2, "maxItems": 2}},
        "pr": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                          "minItems": 2, "maxItems": 2}},
    },
}


def report(scores, labels, threshold=0.5):
    scores, labels, n_pos, n_neg = _validate(scores, labels, "report")
    conf = confusion_at(scores, labels, threshold)
    return MetricsReport(
        auroc=auroc(scores, labels),
        auprc=auprc(scores, labels),
        sensitivity=conf.sensitivity,
        specificity=conf.specificity,
        threshold=float(threshold),
        n_pos=n_pos,
        n_neg=n_neg,
        roc=roc_curve(scores, labels),
        pr=pr_curve(scores, labels),
    )


def write_scores_csv(path, ids, scores, labels):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "score", "label"])
        for i, s, y in zip(ids, scores, labels):
            w.writerow([i, repr(float(s)), int(y)])


def read_scores_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [ScoredSample(float(r["score"]), int(r["label"]), r["id"]) for r in rows]
