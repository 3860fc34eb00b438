"""Multi-label loss laboratory.

Pair-contrast losses for single-positive and fully labelled multi-label
learning, the classic baselines (BCE, focal, asymmetric, the alpha=beta=1
special case), a log-det high-rank penalty, AP-based label smoothing and
correction, and a deterministic desk-scale training harness built on a
portable splitmix64 stream.
"""

from .correction import CorrectionConfig, apply_correction, correction_counts, smoothing_weights
from .labels import (
    NEGATIVE,
    POSITIVE,
    UNKNOWN,
    DataError,
    Dataset,
    assume_negative,
    assume_negative_labels,
    generate_synthetic,
    read_jsonl,
    to_single_positive,
    write_jsonl,
)
from .losses import (
    LossResult,
    OpmlParams,
    asymmetric,
    bce,
    focal,
    opml_full,
    opml_sp,
    soft_opml,
    zlpr,
)
from .metrics import (
    ApReport,
    average_precision,
    mean_average_precision,
    observed_per_class_ap,
    positive_confidence_histogram,
)
from .numkit import (
    NumericalError,
    Rng,
    finite_diff_grad,
    logdet_psd,
    sigmoid,
    softplus,
    stable_log_sum,
)
from .regularizer import HighRankConfig, high_rank_penalty
from .trainer import (
    Model,
    RunReport,
    TrainConfig,
    evaluate,
    forward,
    grad_check,
    init_model,
    train,
)

__version__ = "0.1.0"
