"""High-rank penalty on a batch's predicted label matrix.

Minimizing ``-lam * log det(Y^T Y + eps I)`` pushes the label columns of Y
toward spanning distinct directions. The eps shift keeps the penalty
defined when the batch has fewer rows than labels (Y^T Y rank deficient),
which is the common case for small batches; the unshifted form is
recovered in the full-rank eps -> 0 limit.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .losses import LossResult
from .numkit import logdet_psd


@dataclass(frozen=True)
class HighRankConfig:
    """Trade-off weight and diagonal shift for the high-rank penalty."""

    lam: float = 1e-3
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")


def high_rank_penalty(y_pred, cfg: HighRankConfig) -> LossResult:
    """Penalty value and gradient with respect to the prediction matrix.

    ``value = -lam * log det(Y^T Y + eps I)`` and
    ``grad = -2 lam Y (Y^T Y + eps I)^{-1}``, with the solve done through
    the Cholesky factors rather than an explicit inverse. Y is expected to
    hold sigmoid probabilities of the current batch's scores; the chain
    rule through the sigmoid is the trainer's job, not this function's.
    """
    y = np.asarray(y_pred, dtype=np.float64)
    if y.ndim != 2:
        raise ValueError(f"y_pred must be 2-D, got shape {y.shape}")
    if not np.isfinite(y).all():
        raise ValueError("y_pred has non-finite entries")
    if cfg.lam == 0.0:
        return LossResult(0.0, np.zeros_like(y))
    gram = y.T @ y
    value = -cfg.lam * logdet_psd(gram, cfg.epsilon)
    shifted = gram + cfg.epsilon * np.eye(gram.shape[0])
    factors = cho_factor(shifted, lower=True)
    grad = -2.0 * cfg.lam * cho_solve(factors, y.T).T
    return LossResult(value, grad)
