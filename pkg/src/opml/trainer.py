"""Deterministic minibatch SGD over a linear or one-hidden-layer model.

The training loop composes a loss on the observed labels, optionally the
high-rank penalty (chain rule through the sigmoid), per-epoch smoothing
weights, and the one-shot label correction. Everything is driven by the
splitmix64 stream, so identical (dataset, config, seed) runs are
bit-identical -- including the serialized reports.

Ground-truth labels are used for validation/test evaluation only; loss
functions receive nothing but the observed tri-state labels.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import losses
from .correction import apply_correction, correction_counts, smoothing_weights
from .labels import POSITIVE, UNKNOWN, Dataset, assume_negative_labels
from .metrics import (
    ApReport,
    mean_average_precision,
    observed_per_class_ap,
    positive_confidence_histogram,
)
from .numkit import NumericalError, Rng, finite_diff_grad, sigmoid
from .regularizer import HighRankConfig, high_rank_penalty

LOSS_NAMES = ("bce", "focal", "asl", "zlpr", "opml", "soft-opml")


@dataclass
class Model:
    """Linear (one weight matrix) or MLP (two, with a relu in between).

    Scores: ``x @ W + b`` or ``relu(x @ W1 + b1) @ W2 + b2``.
    """

    weights: list
    biases: list

    @property
    def kind(self) -> str:
        return "linear" if len(self.weights) == 1 else "mlp"

    @property
    def n_features(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_labels(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def hidden_width(self) -> int:
        return 0 if self.kind == "linear" else self.weights[0].shape[1]


def init_model(n_features: int, n_labels: int, rng: Rng, hidden_width: int = 0) -> Model:
    """Seeded init: weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]
    filled row-major layer by layer, biases zero."""

    def fill(rows, cols):
        w = np.empty((rows, cols))
        scale = 1.0 / math.sqrt(rows)
        for i in range(rows):
            for j in range(cols):
                w[i, j] = (2.0 * rng.uniform() - 1.0) * scale
        return w

    if hidden_width < 0:
        raise ValueError(f"hidden_width must be >= 0, got {hidden_width}")
    if hidden_width == 0:
        return Model([fill(n_features, n_labels)], [np.zeros(n_labels)])
    return Model(
        [fill(n_features, hidden_width), fill(hidden_width, n_labels)],
        [np.zeros(hidden_width), np.zeros(n_labels)],
    )


def forward(model: Model, x: np.ndarray) -> np.ndarray:
    if model.kind == "linear":
        return x @ model.weights[0] + model.biases[0]
    hidden = np.maximum(x @ model.weights[0] + model.biases[0], 0.0)
    return hidden @ model.weights[1] + model.biases[1]


def _forward_cached(model: Model, x: np.ndarray):
    if model.kind == "linear":
        return x @ model.weights[0] + model.biases[0], None
    pre = x @ model.weights[0] + model.biases[0]
    hidden = np.maximum(pre, 0.0)
    return hidden @ model.weights[1] + model.biases[1], (pre, hidden)


def _backward(model: Model, x: np.ndarray, cache, grad_scores: np.ndarray):
    """Parameter gradients for a given d(objective)/d(scores)."""
    if model.kind == "linear":
        return [x.T @ grad_scores], [grad_scores.sum(axis=0)]
    pre, hidden = cache
    gw2 = hidden.T @ grad_scores
    gb2 = grad_scores.sum(axis=0)
    ghidden = (grad_scores @ model.weights[1].T) * (pre > 0.0)
    return [x.T @ ghidden, gw2], [ghidden.sum(axis=0), gb2]


@dataclass
class TrainConfig:
    """Everything a run needs; echoed verbatim into the run report.

    ``lam = 0`` disables the high-rank penalty, ``label_num = 0`` disables
    correction. ``warmup_epochs``/``correction_epoch`` default to 20% and
    40% of the epoch budget when left at None. The soft-opml loss trains
    with smoothing weights frozen at zero during warmup (identical
    gradients to the plain single-positive loss), then refreshed from the
    model's own predictions once per epoch.
    """

    loss: str = "bce"
    alpha_tilde: float = 0.5
    beta_tilde: float = 0.5
    gamma_focus: float = 2.0
    gamma_pos: float = 0.0
    gamma_neg: float = 4.0
    margin: float = 0.05
    batch_size: int = 8
    learning_rate: float = 1e-4
    epochs: int = 15
    seed: int = 0
    hidden_width: int = 0
    lam: float = 0.0
    epsilon: float = 1e-6
    label_num: float = 0.0
    epsilon_power: float = 1.0
    warmup_epochs: int | None = None
    correction_epoch: int | None = None
    eval_each_epoch: bool = True

    def __post_init__(self):
        if self.loss not in LOSS_NAMES:
            raise ValueError(f"loss must be one of {LOSS_NAMES}, got {self.loss!r}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.warmup_epochs is not None and self.warmup_epochs < 0:
            raise ValueError("warmup_epochs must be >= 0")
        wu, ce = self.resolved_schedule()
        if ce < wu:
            raise ValueError(f"correction_epoch {ce} precedes warmup_epochs {wu}")

    def resolved_schedule(self) -> tuple:
        warmup = self.warmup_epochs
        if warmup is None:
            warmup = self.epochs // 5
        corr = self.correction_epoch
        if corr is None:
            corr = max(1, int(0.4 * self.epochs))
        return warmup, corr

    def opml_params(self) -> losses.OpmlParams:
        return losses.OpmlParams(self.alpha_tilde, self.beta_tilde)

    def high_rank(self) -> HighRankConfig | None:
        return HighRankConfig(self.lam, self.epsilon) if self.lam > 0 else None


@dataclass
class RunReport:
    config: dict
    train_loss: list = field(default_factory=list)
    val_map: list = field(default_factory=list)
    test_map: list = field(default_factory=list)
    final_test: dict | None = None
    confidence_histogram: list | None = None
    flips: list = field(default_factory=list)
    val_map_std: float | None = None
    split_indices: dict | None = None

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "train_loss": self.train_loss,
            "val_map": self.val_map,
            "test_map": self.test_map,
            "final_test": self.final_test,
            "confidence_histogram": self.confidence_histogram,
            "flips": self.flips,
            "val_map_std": self.val_map_std,
            "split_indices": self.split_indices,
        }


def batch_loss(cfg: TrainConfig, scores, labels, gamma=None) -> losses.LossResult:
    """Dispatch one batch to the configured loss."""
    if cfg.loss == "bce":
        return losses.bce(scores, labels)
    if cfg.loss == "focal":
        return losses.focal(scores, labels, cfg.gamma_focus)
    if cfg.loss == "asl":
        return losses.asymmetric(scores, labels, cfg.gamma_pos, cfg.gamma_neg, cfg.margin)
    if cfg.loss == "zlpr":
        return losses.zlpr(scores, labels)
    if cfg.loss == "opml":
        return losses.opml_full(scores, labels, cfg.opml_params())
    if gamma is None:
        gamma = np.zeros_like(scores)
    return losses.soft_opml(scores, labels, gamma, cfg.opml_params())


def _objective(cfg: TrainConfig, scores, labels, gamma, hr: HighRankConfig | None):
    """Loss plus optional high-rank penalty; gradient w.r.t. scores."""
    res = batch_loss(cfg, scores, labels, gamma)
    value, grad = res.value, res.grad
    if hr is not None:
        prob = sigmoid(scores)
        pen = high_rank_penalty(prob, hr)
        value = value + pen.value
        grad = grad + pen.grad * (prob * (1.0 - prob))
    return value, grad


def evaluate(model: Model, dataset: Dataset, bin_width: float = 0.2):
    """Test-time metrics: mAP report and positive-confidence histogram,
    both computed from sigmoid probabilities against the truth labels."""
    prob = sigmoid(forward(model, dataset.features))
    report = mean_average_precision(prob, dataset.truth)
    hist = positive_confidence_histogram(prob, dataset.truth, bin_width)
    return report, hist


def train(
    dataset: Dataset,
    model: Model,
    cfg: TrainConfig,
    rng: Rng,
    val_data: Dataset | None = None,
    test_data: Dataset | None = None,
):
    """Run the full training loop; returns (model, report).

    Per epoch: one-shot correction if due, smoothing-weight refresh (both
    from the epoch-start model's predictions on the training set, with the
    AP computed against the assume-negative view of the current observed
    labels), then a seeded shuffle and plain SGD steps over minibatches
    (no momentum, no weight decay). Validation/test mAP are recorded per
    epoch when eval data is supplied and ``eval_each_epoch`` is set.

    Raises:
        NumericalError: non-finite loss, with epoch/batch coordinates.
    """
    if dataset.n_features != model.n_features or dataset.n_labels != model.n_labels:
        raise ValueError("dataset and model dimensions disagree")
    x = dataset.features
    n = dataset.n_samples
    current = dataset.observed.copy()
    hr = cfg.high_rank()
    warmup, correction_epoch = cfg.resolved_schedule()
    correction_enabled = cfg.label_num > 0 and correction_epoch >= 1
    gamma = np.zeros((n, dataset.n_labels))
    report = RunReport(config={})

    for epoch in range(1, cfg.epochs + 1):
        smoothing_due = cfg.loss == "soft-opml" and epoch > warmup
        correction_due = correction_enabled and epoch == correction_epoch
        if smoothing_due or correction_due:
            full_scores = forward(model, x)
            if correction_due:
                ap = observed_per_class_ap(full_scores, assume_negative_labels(current))
                obs_num = (current == POSITIVE).sum(axis=0)
                unknown_num = (current == UNKNOWN).sum(axis=0)
                counts = correction_counts(n, obs_num, ap, cfg.label_num, unknown_num)
                flipped = apply_correction(current, full_scores, counts)
                for i, l in np.argwhere(flipped != current):
                    report.flips.append(
                        {
                            "epoch": epoch,
                            "sample": int(i),
                            "class": int(l),
                            "score": float(full_scores[i, l]),
                        }
                    )
                current = flipped
            if smoothing_due:
                ap = observed_per_class_ap(full_scores, assume_negative_labels(current))
                gamma = smoothing_weights(sigmoid(full_scores), ap, cfg.epsilon_power)

        perm = rng.permutation(n)
        loss_acc = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            xb = x[idx]
            scores, cache = _forward_cached(model, xb)
            value, grad_scores = _objective(cfg, scores, current[idx], gamma[idx], hr)
            if not math.isfinite(value):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            gws, gbs = _backward(model, xb, cache, grad_scores)
            for w, g in zip(model.weights, gws):
                w -= cfg.learning_rate * g
            for b, g in zip(model.biases, gbs):
                b -= cfg.learning_rate * g
            loss_acc += value * len(idx)
        report.train_loss.append(loss_acc / n)

        if cfg.eval_each_epoch:
            if val_data is not None:
                report.val_map.append(mean_average_precision(
                    sigmoid(forward(model, val_data.features)), val_data.truth
                ).map)
            if test_data is not None:
                report.test_map.append(mean_average_precision(
                    sigmoid(forward(model, test_data.features)), test_data.truth
                ).map)

    if test_data is not None:
        final, hist = evaluate(model, test_data)
        report.final_test = final.to_dict()
        report.confidence_histogram = [int(c) for c in hist]
    if report.val_map:
        report.val_map_std = float(np.std(report.val_map))
    return model, report


def _model_blocks(model: Model):
    blocks = []
    for i, w in enumerate(model.weights):
        blocks.append((f"w{i}", w))
    for i, b in enumerate(model.biases):
        blocks.append((f"b{i}", b))
    return blocks


def grad_check(model: Model, dataset: Dataset, cfg: TrainConfig, h: float = 1e-5) -> dict:
    """Compare backprop parameter gradients against central differences.

    The objective is the configured loss (plus the high-rank penalty when
    enabled) on the full given dataset; smoothing weights for soft-opml
    are computed once from the initial model and frozen, exactly as one
    training epoch would see them. Returns the max relative error per
    parameter block, ``|a - f| / max(|a|, |f|, 1e-6)``. Keep the dataset
    small (<= 16 samples): finite differencing is O(#params) evaluations.
    """
    x = dataset.features
    lbl = dataset.observed
    hr = cfg.high_rank()
    if cfg.loss == "soft-opml":
        full_scores = forward(model, x)
        ap = observed_per_class_ap(full_scores, assume_negative_labels(lbl))
        gamma = smoothing_weights(sigmoid(full_scores), ap, cfg.epsilon_power)
    else:
        gamma = None

    scores, cache = _forward_cached(model, x)
    _, grad_scores = _objective(cfg, scores, lbl, gamma, hr)
    gws, gbs = _backward(model, x, cache, grad_scores)
    analytic = {f"w{i}": g for i, g in enumerate(gws)}
    analytic.update({f"b{i}": g for i, g in enumerate(gbs)})

    report = {}
    for name, param in _model_blocks(model):
        original = param.copy()

        def objective_at(p, _param=param):
            _param[...] = p.reshape(_param.shape)
            try:
                value, _ = _objective(cfg, forward(model, x), lbl, gamma, hr)
            finally:
                _param[...] = original
            return value

        fd = finite_diff_grad(objective_at, original.reshape(1, -1), h=h)
        a = analytic[name].reshape(1, -1)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(fd)), 1e-6)
        report[name] = float((np.abs(a - fd) / denom).max())
    return report
