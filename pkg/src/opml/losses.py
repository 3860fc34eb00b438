"""Multi-label loss functions with exact analytic gradients w.r.t. scores.

Every loss consumes raw scores (one row per sample, one column per label)
and tri-state labels, and returns a scalar value plus the full gradient
matrix. Sigmoid activation, where a loss needs probabilities, is applied
internally, so the training loop works with a single score convention.

Reduction conventions, pinned deliberately:

* ``bce`` / ``focal`` / ``asymmetric`` average over all N*L entries.
* the pair-contrast family (``opml_sp``, ``opml_full``, ``zlpr``,
  ``soft_opml``) keeps its per-row form as written and averages over the
  N rows only.

Absolute magnitudes are therefore not comparable across the two families;
only within-loss behavior is.

Gradient shapes worth knowing (alpha, beta are the derived constants):

* pair-contrast positive labels:  -exp(-s_p) / (alpha + sum_p exp(-s_p))
* pair-contrast negative labels:  +exp(s_n) / (beta + sum_n exp(s_n))

so each row's negative-label gradients share one denominator: the more
negatives a row has, the smaller each individual push, which is what keeps
assumed negatives from dominating single-positive training.
"""

from dataclasses import dataclass

import numpy as np

from .labels import NEGATIVE, POSITIVE, UNKNOWN
from .numkit import sigmoid, softplus


@dataclass(frozen=True)
class OpmlParams:
    """Pair-contrast constants via the bounded reparameterization.

    ``alpha = alpha_tilde / (1 - alpha_tilde)`` and likewise for beta, so
    picking the tilde values in (0, 1) spans the whole (0, inf) range of
    the loss constants. (0.5, 0.5) gives alpha = beta = 1.
    """

    alpha_tilde: float = 0.5
    beta_tilde: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.alpha_tilde < 1.0:
            raise ValueError(f"alpha_tilde must be in (0,1), got {self.alpha_tilde}")
        if not 0.0 < self.beta_tilde < 1.0:
            raise ValueError(f"beta_tilde must be in (0,1), got {self.beta_tilde}")

    @property
    def alpha(self) -> float:
        return self.alpha_tilde / (1.0 - self.alpha_tilde)

    @property
    def beta(self) -> float:
        return self.beta_tilde / (1.0 - self.beta_tilde)


@dataclass
class LossResult:
    value: float
    grad: np.ndarray


def _check_inputs(scores, labels, allow_unknown: bool):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int8)
    if scores.ndim != 2:
        raise ValueError(f"scores must be 2-D, got shape {scores.shape}")
    if labels.shape != scores.shape:
        raise ValueError(
            f"labels shape {labels.shape} does not match scores shape {scores.shape}"
        )
    if not np.isfinite(scores).all():
        raise ValueError("scores have non-finite entries")
    if not allow_unknown and (labels == UNKNOWN).any():
        raise ValueError(
            "unknown label state present; apply the assume-negative conversion first"
        )
    return scores, labels


def _masked_lse(constant, terms, mask, weights=None):
    """Row-wise log(constant + sum of [weights *] exp(terms)) over a mask.

    Returns ``(lse, coef)`` where ``coef[i, j] = w_ij exp(terms_ij) /
    (constant + sum_j w_ij exp(terms_ij))`` on active entries and exactly
    zero elsewhere; lse is the per-row log value. Entries with zero weight
    are dropped (never evaluated), so gamma = 0 cannot poison the max
    shift. Requires constant > 0.
    """
    if weights is None:
        active = mask
    else:
        active = mask & (weights > 0)
    hi = np.where(active, terms, -np.inf).max(axis=1)
    m = np.maximum(0.0, hi)
    shifted = np.exp(np.where(active, terms, 0.0) - m[:, None])
    if weights is None:
        e = np.where(active, shifted, 0.0)
    else:
        e = np.where(active, weights * shifted, 0.0)
    total = constant * np.exp(-m) + e.sum(axis=1)
    lse = m + np.log(total)
    coef = e / total[:, None]
    return lse, coef


def bce(scores, labels) -> LossResult:
    """Binary cross entropy with internal sigmoid, mean over all entries.

    Loss per entry is softplus(-s) for positives and softplus(s) for
    negatives; the gradient is -sigmoid(-s) resp. +sigmoid(s), the
    centrosymmetric regime that treats every label equally. Labels must
    contain no unknown state.
    """
    scores, labels = _check_inputs(scores, labels, allow_unknown=False)
    pos = labels == POSITIVE
    z = np.where(pos, -scores, scores)
    scale = scores.size
    value = float(softplus(z).sum()) / scale
    grad = np.where(pos, -1.0, 1.0) * sigmoid(z) / scale
    return LossResult(value, grad)


def _focal_entries(z, gamma):
    """Per-entry focal value and gradient magnitude in margin form.

    ``z`` is the margin logit (-s for positives, +s for negatives), so the
    true-class probability is p_t = sigmoid(-z) and the entry loss is
    ``(1 - p_t)^gamma * softplus(z)``. Gradient magnitude w.r.t. the score:
    ``(1-p_t)^gamma * (sigmoid(z) + gamma * p_t * softplus(z))``.
    """
    sp = softplus(z)
    sz = sigmoid(z)
    w = sz**gamma
    if gamma == 0.0:
        return w * sp, w * sz
    pt = sigmoid(-z)
    return w * sp, w * (sz + gamma * (pt * sp))


def focal(scores, labels, gamma_focus: float) -> LossResult:
    """Focal loss: cross entropy down-weighted by (1 - p_t)^gamma_focus.

    gamma_focus = 0 reduces to :func:`bce` bit-for-bit.
    """
    scores, labels = _check_inputs(scores, labels, allow_unknown=False)
    if gamma_focus < 0:
        raise ValueError(f"gamma_focus must be >= 0, got {gamma_focus}")
    pos = labels == POSITIVE
    z = np.where(pos, -scores, scores)
    val_entries, grad_mag = _focal_entries(z, gamma_focus)
    scale = scores.size
    value = float(val_entries.sum()) / scale
    grad = np.where(pos, -1.0, 1.0) * grad_mag / scale
    return LossResult(value, grad)


def asymmetric(scores, labels, gamma_pos: float, gamma_neg: float, margin: float) -> LossResult:
    """Asymmetric loss: separate focusing exponents plus a probability
    margin shift on negatives.

    Positives use the focal form with gamma_pos. Negatives first clamp
    p <- max(p - margin, 0); entries at or below the margin contribute
    nothing (value and gradient zero). (0, 0, 0) reduces to :func:`bce`
    bit-for-bit. The gradient is discontinuous at the clamp point, so
    finite-difference checks must stay away from p == margin.
    """
    scores, labels = _check_inputs(scores, labels, allow_unknown=False)
    if gamma_pos < 0 or gamma_neg < 0:
        raise ValueError("focusing exponents must be >= 0")
    if not 0.0 <= margin < 1.0:
        raise ValueError(f"margin must be in [0,1), got {margin}")
    pos = labels == POSITIVE
    neg = ~pos
    values = np.zeros_like(scores)
    grad = np.zeros_like(scores)

    vp, gp = _focal_entries(-scores[pos], gamma_pos)
    values[pos] = vp
    grad[pos] = -gp

    if margin == 0.0:
        vn, gn = _focal_entries(scores[neg], gamma_neg)
        values[neg] = vn
        grad[neg] = gn
    else:
        p = sigmoid(scores[neg])
        vn = np.zeros_like(p)
        gn = np.zeros_like(p)
        live = p > margin
        pm = p[live] - margin
        log1m = np.log1p(-pm)
        w = pm**gamma_neg
        vn[live] = -(w * log1m)
        dldpm = w / (1.0 - pm)
        if gamma_neg != 0.0:
            dldpm = dldpm - gamma_neg * pm ** (gamma_neg - 1.0) * log1m
        gn[live] = dldpm * (p[live] * (1.0 - p[live]))
        values[neg] = vn
        grad[neg] = gn

    scale = scores.size
    return LossResult(float(values.sum()) / scale, grad / scale)


def _pair_contrast(scores, labels, params: OpmlParams) -> LossResult:
    """Shared row kernel: log(a + sum_p e^{-s_p}) + log(b + sum_n e^{s_n})."""
    pos = labels == POSITIVE
    neg = labels == NEGATIVE
    lse_p, coef_p = _masked_lse(params.alpha, -scores, pos)
    lse_n, coef_n = _masked_lse(params.beta, scores, neg)
    n = scores.shape[0]
    value = float((lse_p + lse_n).sum()) / n
    grad = (coef_n - coef_p) / n
    return LossResult(value, grad)


def opml_sp(scores, labels, params: OpmlParams) -> LossResult:
    """Single-positive pair-contrast loss, mean over rows.

    Per row: ``log(alpha + exp(-s_p)) + log(beta + sum_n exp(s_n))`` where
    p is the single observed positive and n ranges over the labels marked
    negative (callers convert unknowns to negatives first). Entries still
    marked unknown are ignored and carry exactly zero gradient.

    Raises:
        ValueError: any row without exactly one positive label.
    """
    scores, labels = _check_inputs(scores, labels, allow_unknown=True)
    pos_counts = (labels == POSITIVE).sum(axis=1)
    bad = np.flatnonzero(pos_counts != 1)
    if bad.size:
        raise ValueError(
            f"row {bad[0]} has {pos_counts[bad[0]]} positive labels, expected exactly 1"
        )
    return _pair_contrast(scores, labels, params)


def opml_full(scores, labels, params: OpmlParams) -> LossResult:
    """Full-label pair-contrast loss, mean over rows.

    Per row: ``log(alpha + sum_p exp(-s_p)) + log(beta + sum_n exp(s_n))``.
    On a row with exactly one positive this is identical (bit-for-bit) to
    :func:`opml_sp`. A row with no positives (or no negatives) degenerates
    to a constant ``log alpha`` (resp. ``log beta``) term with zero
    gradient; that is allowed, not an error. Unknown entries are ignored
    and carry exactly zero gradient.
    """
    scores, labels = _check_inputs(scores, labels, allow_unknown=True)
    return _pair_contrast(scores, labels, params)


def zlpr(scores, labels) -> LossResult:
    """The alpha = beta = 1 special case of :func:`opml_full`."""
    return opml_full(scores, labels, OpmlParams(0.5, 0.5))


def soft_opml(scores, labels, gamma, params: OpmlParams) -> LossResult:
    """Label-smoothed pair-contrast loss for single-positive training.

    Per row, with U the unknown-label set and per-entry smoothing weights
    gamma in [0, 1]::

        log(alpha + sum_p exp(-s_p))
      + log(alpha + sum_{l in U} gamma_l exp(-s_l))
      + log(beta  + sum_{l in U} (1 - gamma_l) exp(s_l))

    With gamma = 0 the middle term collapses to the constant log(alpha)
    and the gradients equal :func:`opml_sp` gradients exactly; with
    gamma = 1 the last term collapses to log(beta) and unknown labels
    receive only positive-side gradient.

    The positive term sums over every observed positive so that training
    can continue after label correction flips unknown entries to positive;
    with a single positive it is the canonical single-positive form.
    Entries marked negative are ignored (zero gradient).

    Raises:
        ValueError: a row without any positive label, or gamma outside
            [0, 1] on an unknown entry.
    """
    scores, labels = _check_inputs(scores, labels, allow_unknown=True)
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.shape != scores.shape:
        raise ValueError(
            f"gamma shape {gamma.shape} does not match scores shape {scores.shape}"
        )
    pos = labels == POSITIVE
    unk = labels == UNKNOWN
    bad = np.flatnonzero(~pos.any(axis=1))
    if bad.size:
        raise ValueError(f"row {bad[0]} has no positive label")
    g_unk = gamma[unk]
    if g_unk.size and (not np.isfinite(g_unk).all() or g_unk.min() < 0 or g_unk.max() > 1):
        raise ValueError("gamma must lie in [0,1] on unknown entries")

    lse_p, coef_p = _masked_lse(params.alpha, -scores, pos)
    lse_u, coef_u = _masked_lse(params.alpha, -scores, unk, weights=gamma)
    lse_n, coef_n = _masked_lse(params.beta, scores, unk, weights=1.0 - gamma)
    n = scores.shape[0]
    value = float((lse_p + lse_u + lse_n).sum()) / n
    grad = (coef_n - coef_p - coef_u) / n
    return LossResult(value, grad)
