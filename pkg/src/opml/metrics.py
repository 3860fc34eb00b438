"""Ranking metrics: per-class average precision, mAP, and the
positive-confidence histogram.

AP uses the standard information-retrieval definition: sort by descending
score (ties broken by ascending sample index, which makes every result
reproducible), then average the precision at the rank of each positive.
Only the ranking matters, so any strictly increasing transform of the
scores leaves AP unchanged.
"""

from dataclasses import dataclass, field

import numpy as np

from .labels import POSITIVE, UNKNOWN


@dataclass
class ApReport:
    """Per-class AP plus their mean over the classes that have positives.

    ``per_class_ap`` has one slot per class; classes without a single
    positive are excluded from the mean, left at 0.0, and omitted from
    ``evaluated_classes``.
    """

    per_class_ap: list[float]
    map: float
    evaluated_classes: list[int]
    positives_per_class: list[int]
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "per_class_ap": self.per_class_ap,
            "map": self.map,
            "evaluated_classes": self.evaluated_classes,
            "positives_per_class": self.positives_per_class,
        }


def _ranking(scores: np.ndarray) -> np.ndarray:
    # descending score, ties by ascending sample index
    return np.lexsort((np.arange(scores.size), -scores))


def average_precision(scores, truth) -> float:
    """AP of one ranking: mean precision at the rank of each positive.

    The accumulation over positives runs sequentially in rank order so the
    result is identical to a rank-by-rank enumeration of the same sums.

    Raises:
        ValueError: no positive in truth (AP undefined; exclude the class).
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    t = np.asarray(truth).ravel()
    if s.size != t.size:
        raise ValueError("scores and truth must have the same length")
    if not np.isfinite(s).all():
        raise ValueError("scores have non-finite entries")
    if not np.isin(t, (0, 1)).all():
        raise ValueError("truth must be binary")
    n_pos = int(t.sum())
    if n_pos == 0:
        raise ValueError("average precision undefined without a positive")
    hits = t[_ranking(s)].astype(np.int64)
    precision = np.cumsum(hits) / np.arange(1, s.size + 1)
    total = 0.0
    for p in precision[hits == 1]:
        total += p
    return total / n_pos


def mean_average_precision(scores, truth) -> ApReport:
    """Column-wise AP over a score matrix, averaged over non-empty classes.

    Raises:
        ValueError: shape mismatch, or no class has a positive at all.
    """
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(truth)
    if s.ndim != 2 or s.shape != t.shape:
        raise ValueError("scores and truth must be matrices of the same shape")
    n_labels = s.shape[1]
    per_class = [0.0] * n_labels
    evaluated = []
    positives = [int(c) for c in t.sum(axis=0)]
    for l in range(n_labels):
        if positives[l] == 0:
            continue
        per_class[l] = average_precision(s[:, l], t[:, l])
        evaluated.append(l)
    if not evaluated:
        raise ValueError("no class has a positive label")
    total = 0.0
    for l in evaluated:
        total += per_class[l]
    return ApReport(per_class, total / len(evaluated), evaluated, positives)


def observed_per_class_ap(scores, observed) -> np.ndarray:
    """Training-set AP against observed labels only.

    Per class: samples whose state is positive count as positives, samples
    marked negative (i.e. post assume-negative) as negatives, unknown
    entries are excluded from the ranking. A class without any observed
    positive gets AP 0.0 -- maximally unreliable, so downstream smoothing
    trusts it least and correction modifies it most.
    """
    s = np.asarray(scores, dtype=np.float64)
    obs = np.asarray(observed, dtype=np.int8)
    if s.shape != obs.shape:
        raise ValueError("scores and observed must have the same shape")
    n_labels = s.shape[1]
    ap = np.zeros(n_labels)
    for l in range(n_labels):
        known = obs[:, l] != UNKNOWN
        pos = (obs[known, l] == POSITIVE).astype(np.int8)
        if pos.sum() == 0:
            continue
        ap[l] = average_precision(s[known, l], pos)
    return ap


def positive_confidence_histogram(pred, truth, bin_width: float = 0.2) -> np.ndarray:
    """Histogram of predicted confidences at the truth-positive positions.

    Bins are ``[i*w, (i+1)*w)`` with the last bin closed at 1.0, so the
    counts always sum to the number of truth positives. ``bin_width`` must
    divide 1 evenly.
    """
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth)
    if p.shape != t.shape:
        raise ValueError("pred and truth must have the same shape")
    if not (0.0 < bin_width <= 1.0):
        raise ValueError(f"bin_width must be in (0,1], got {bin_width}")
    n_bins = round(1.0 / bin_width)
    if abs(n_bins * bin_width - 1.0) > 1e-9:
        raise ValueError(f"bin_width {bin_width} does not divide 1 evenly")
    vals = p[t == 1]
    if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
        raise ValueError("pred entries must lie in [0,1]")
    idx = np.minimum((vals * n_bins).astype(np.int64), n_bins - 1)
    return np.bincount(idx, minlength=n_bins)
