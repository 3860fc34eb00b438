"""Adaptive label smoothing weights and AP-based label correction.

Both mechanisms trust a class in proportion to its training AP on the
observed labels: smoothing weights scale per-entry predictions by
``AP_l^epsilon_power``, and correction flips the top-scored unknown
entries of each class to positive, with fewer flips the higher the AP.
"""

from dataclasses import dataclass

import numpy as np

from .labels import POSITIVE, UNKNOWN


@dataclass(frozen=True)
class CorrectionConfig:
    """Scale and schedule knobs for smoothing and correction.

    ``label_num`` scales the per-class correction volume (0 disables
    correction); ``epsilon_power`` is the AP exponent in the smoothing
    weights. ``warmup_epochs`` is the number of initial epochs trained
    with all smoothing weights at zero; ``correction_epoch`` is the
    (1-based) epoch at whose start the one-shot, permanent correction
    fires.
    """

    label_num: float = 1.0
    epsilon_power: float = 1.0
    warmup_epochs: int = 0
    correction_epoch: int = 0

    def __post_init__(self):
        if self.label_num < 0:
            raise ValueError(f"label_num must be >= 0, got {self.label_num}")
        if self.epsilon_power < 0:
            raise ValueError(f"epsilon_power must be >= 0, got {self.epsilon_power}")
        if self.warmup_epochs < 0 or self.correction_epoch < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.correction_epoch and self.correction_epoch < self.warmup_epochs:
            raise ValueError(
                f"correction_epoch {self.correction_epoch} precedes "
                f"warmup_epochs {self.warmup_epochs}"
            )


def smoothing_weights(pred, ap, epsilon_power: float) -> np.ndarray:
    """Per-entry smoothing weights ``gamma_il = pred_il * AP_l^epsilon_power``.

    Defined on the full matrix; the smoothed loss reads only the unknown
    positions. With pred and AP in [0, 1] and a nonnegative exponent the
    weights stay in [0, 1]; AP^0 == 1, so epsilon_power = 0 returns pred
    unchanged.
    """
    p = np.asarray(pred, dtype=np.float64)
    a = np.asarray(ap, dtype=np.float64)
    if p.ndim != 2 or a.shape != (p.shape[1],):
        raise ValueError("pred must be (n, L) and ap must be (L,)")
    if not np.isfinite(p).all() or p.min() < 0 or p.max() > 1:
        raise ValueError("pred entries must lie in [0,1]")
    if not np.isfinite(a).all() or a.min() < 0 or a.max() > 1:
        raise ValueError("ap entries must lie in [0,1]")
    if epsilon_power < 0:
        raise ValueError(f"epsilon_power must be >= 0, got {epsilon_power}")
    return p * np.power(a, epsilon_power)[None, :]


def correction_counts(tr_num: int, obs_num, ap, label_num: float, unknown_num=None):
    """Number of labels to flip per class.

    ``floor((obs_num_l * label_num) * (1 - AP_l))`` -- the per-class
    correction ratio ``(obs_num_l / tr_num) * label_num`` times ``tr_num``
    cancels the training-set size, so correction volume scales with how
    often a class was observed and shrinks linearly as its AP grows.
    Flooring is deliberate: conservative toward fewer flips. When
    ``unknown_num`` is given, counts are clamped to the per-class unknown
    pool.
    """
    obs = np.asarray(obs_num, dtype=np.int64)
    a = np.asarray(ap, dtype=np.float64)
    if obs.shape != a.shape or obs.ndim != 1:
        raise ValueError("obs_num and ap must be vectors of the same length")
    if (obs < 0).any() or (obs > tr_num).any():
        raise ValueError("obs_num entries must lie in [0, tr_num]")
    if label_num < 0:
        raise ValueError(f"label_num must be >= 0, got {label_num}")
    counts = np.floor((obs * label_num) * (1.0 - a)).astype(np.int64)
    if unknown_num is not None:
        counts = np.minimum(counts, np.asarray(unknown_num, dtype=np.int64))
    return counts


def apply_correction(labels, scores, counts) -> np.ndarray:
    """Flip the top-scored unknown entries of each class to positive.

    Per class l, the ``counts[l]`` unknown entries with the highest scores
    become positive (ties broken by ascending sample index). Observed
    entries are never touched and nothing is ever flipped to negative.
    Returns a new label matrix; the input is left unchanged.

    Raises:
        ValueError: counts[l] exceeds the unknown pool of class l.
    """
    lbl = np.asarray(labels, dtype=np.int8)
    s = np.asarray(scores, dtype=np.float64)
    c = np.asarray(counts, dtype=np.int64)
    if lbl.ndim != 2 or s.shape != lbl.shape or c.shape != (lbl.shape[1],):
        raise ValueError("labels/scores must be (n, L) and counts (L,)")
    if (c < 0).any():
        raise ValueError("counts must be >= 0")
    out = lbl.copy()
    for l in range(lbl.shape[1]):
        k = int(c[l])
        if k == 0:
            continue
        pool = np.flatnonzero(lbl[:, l] == UNKNOWN)
        if k > pool.size:
            raise ValueError(
                f"class {l}: {k} corrections requested but only "
                f"{pool.size} unknown entries"
            )
        order = np.lexsort((pool, -s[pool, l]))
        out[pool[order[:k]], l] = POSITIVE
    return out
