"""Multi-label dataset model: tri-state observed labels, the single-positive
transform, the assume-negative conversion, synthetic data generation, and
JSONL file I/O.

Observed labels are int8 matrices over three states: POSITIVE (1),
NEGATIVE (0), and UNKNOWN (-1) for unobserved entries. Ground-truth labels
travel with every dataset but exist for evaluation only; training code must
consume ``observed`` exclusively.
"""

import json
from dataclasses import dataclass

import numpy as np

from .numkit import Rng

POSITIVE = np.int8(1)
NEGATIVE = np.int8(0)
UNKNOWN = np.int8(-1)


class DataError(ValueError):
    """Malformed dataset file (bad line, bad shape, bad index)."""


def _as_tristate(arr) -> np.ndarray:
    a = np.asarray(arr, dtype=np.int8)
    if a.ndim != 2:
        raise ValueError(f"label matrix must be 2-D, got shape {a.shape}")
    if not np.isin(a, (-1, 0, 1)).all():
        raise ValueError("label states must be in {1 (pos), 0 (neg), -1 (unknown)}")
    return a


@dataclass
class Dataset:
    """Feature matrix plus observed tri-state labels and ground truth.

    Invariants (checked on construction): row counts agree, features are
    finite, every truth row has at least one positive, and observed
    positives are a subset of truth positives. Observed negatives may
    contradict the truth -- that is exactly the false-negative noise the
    assume-negative conversion introduces.
    """

    features: np.ndarray
    observed: np.ndarray
    truth: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.observed = _as_tristate(self.observed)
        self.truth = np.asarray(self.truth, dtype=np.int8)
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.features.shape}")
        if not np.isfinite(self.features).all():
            raise ValueError("features have non-finite entries")
        if self.truth.ndim != 2 or not np.isin(self.truth, (0, 1)).all():
            raise ValueError("truth must be a binary matrix")
        n = self.features.shape[0]
        if self.observed.shape[0] != n or self.truth.shape[0] != n:
            raise ValueError("row counts of features/observed/truth disagree")
        if self.observed.shape[1] != self.truth.shape[1]:
            raise ValueError("label counts of observed/truth disagree")
        empty = np.flatnonzero(self.truth.sum(axis=1) == 0)
        if empty.size:
            raise ValueError(f"truth row {empty[0]} has no positive label")
        bad = np.flatnonzero(((self.observed == POSITIVE) & (self.truth == 0)).any(axis=1))
        if bad.size:
            raise ValueError(f"row {bad[0]}: observed positive not in truth")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_labels(self) -> int:
        return self.truth.shape[1]


def take_rows(dataset: Dataset, indices) -> Dataset:
    """Row-sliced copy of a dataset (for splits and subsamples)."""
    idx = np.asarray(indices, dtype=np.int64)
    return Dataset(dataset.features[idx], dataset.observed[idx], dataset.truth[idx])


def assume_negative_labels(observed: np.ndarray) -> np.ndarray:
    """Array-level assume-negative view: every UNKNOWN becomes NEGATIVE."""
    observed = _as_tristate(observed)
    return np.where(observed == UNKNOWN, NEGATIVE, observed).astype(np.int8)


def assume_negative(sp: Dataset) -> Dataset:
    """Convert all unknown labels to negatives (the AN assumption).

    Positives are untouched; the per-row observed-positive count is
    preserved. On single-positive data this plants one false negative for
    every discarded true positive.
    """
    return Dataset(sp.features, assume_negative_labels(sp.observed), sp.truth)


def to_single_positive(full: Dataset, rng: Rng) -> Dataset:
    """Keep one uniformly chosen true positive per row, hide everything else.

    Mirrors the usual single-positive protocol: the transform is applied
    once and the result is treated as frozen -- serialize it rather than
    re-drawing per run. Deterministic under the rng seed (one
    ``uniform_index`` draw per row, in row order).
    """
    observed = np.full_like(full.observed, UNKNOWN)
    for i in range(full.n_samples):
        pos = np.flatnonzero(full.truth[i])
        if pos.size == 0:
            raise ValueError(f"row {i} has no positive label to keep")
        keep = pos[rng.uniform_index(pos.size)]
        observed[i, keep] = POSITIVE
    return Dataset(full.features, observed, full.truth)


def generate_synthetic(
    n_samples: int,
    n_features: int,
    n_labels: int,
    labels_per_sample_mean: float,
    noise_sd: float,
    rng: Rng,
) -> Dataset:
    """Generate a fully labelled dataset with label-prototype structure.

    One Gaussian prototype per label is drawn in feature space (row-major
    N(0,1) entries). Per sample: ``k = clamp(Poisson(mean), 1, n_labels)``
    labels are chosen without replacement (partial Fisher-Yates over the
    label indices), the feature vector is the mean of the chosen prototypes
    plus N(0, noise_sd^2) per-coordinate noise, and the chosen labels are
    the truth positives. At ``noise_sd = 0`` the classes are linearly
    separable whenever ``n_features >= n_labels`` (prototypes are almost
    surely linearly independent).

    Draw order per sample is fixed: k, then the k index draws, then
    n_features noise draws. Identical seeds give bit-identical datasets.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if n_features < 1:
        raise ValueError(f"n_features must be >= 1, got {n_features}")
    if n_labels < 2:
        raise ValueError(f"n_labels must be >= 2, got {n_labels}")
    if labels_per_sample_mean < 1:
        raise ValueError(
            f"labels_per_sample_mean must be >= 1, got {labels_per_sample_mean}"
        )
    if noise_sd < 0:
        raise ValueError(f"noise_sd must be >= 0, got {noise_sd}")

    prototypes = np.empty((n_labels, n_features))
    for l in range(n_labels):
        for j in range(n_features):
            prototypes[l, j] = rng.normal()

    features = np.empty((n_samples, n_features))
    truth = np.zeros((n_samples, n_labels), dtype=np.int8)
    pool = np.arange(n_labels)
    for i in range(n_samples):
        k = min(max(rng.poisson(labels_per_sample_mean), 1), n_labels)
        pool[:] = np.arange(n_labels)
        for j in range(k):
            swap = j + rng.uniform_index(n_labels - j)
            pool[j], pool[swap] = pool[swap], pool[j]
        chosen = pool[:k]
        truth[i, chosen] = 1
        features[i] = prototypes[chosen].mean(axis=0)
        for j in range(n_features):
            features[i, j] += noise_sd * rng.normal()

    observed = np.where(truth == 1, POSITIVE, NEGATIVE).astype(np.int8)
    return Dataset(features, observed, truth)


def write_jsonl(dataset: Dataset, path) -> None:
    """Write a dataset as JSONL: a header object then one object per sample.

    Header: ``{"n_labels": L, "n_features": d}``. Rows:
    ``{"x": [...], "pos": [...], "neg": [...], "truth": [...]}`` where pos
    and neg are the observed label indices (ascending, disjoint), truth is
    the full ground-truth positive index list (ascending), and indices
    absent from pos and neg are unknown. Floats round-trip bit-exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        header = {"n_labels": dataset.n_labels, "n_features": dataset.n_features}
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for i in range(dataset.n_samples):
            row = {
                "x": dataset.features[i].tolist(),
                "pos": np.flatnonzero(dataset.observed[i] == POSITIVE).tolist(),
                "neg": np.flatnonzero(dataset.observed[i] == NEGATIVE).tolist(),
                "truth": np.flatnonzero(dataset.truth[i] == 1).tolist(),
            }
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")


def _index_list(raw, n_labels: int, line: int, key: str) -> list:
    if not isinstance(raw, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in raw):
        raise DataError(f"line {line}: '{key}' must be a list of integers")
    if any(v < 0 or v >= n_labels for v in raw):
        raise DataError(f"line {line}: '{key}' index out of range [0, {n_labels})")
    if any(b <= a for a, b in zip(raw, raw[1:])):
        raise DataError(f"line {line}: '{key}' must be strictly ascending")
    return raw


def read_jsonl(path) -> Dataset:
    """Read a dataset written by :func:`write_jsonl`.

    Raises :class:`DataError` naming the offending 1-based line on any
    malformed content: bad JSON, wrong keys, inconsistent dimensions,
    out-of-range or unsorted indices, or overlapping pos/neg lists.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataError("line 1: missing header")

    def parse(line_no: int) -> dict:
        try:
            obj = json.loads(lines[line_no - 1])
        except json.JSONDecodeError as exc:
            raise DataError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise DataError(f"line {line_no}: expected a JSON object")
        return obj

    header = parse(1)
    if set(header) != {"n_labels", "n_features"}:
        raise DataError("line 1: header must have exactly n_labels and n_features")
    n_labels, n_features = header["n_labels"], header["n_features"]
    if not (isinstance(n_labels, int) and n_labels >= 1):
        raise DataError("line 1: n_labels must be a positive integer")
    if not (isinstance(n_features, int) and n_features >= 1):
        raise DataError("line 1: n_features must be a positive integer")

    n = len(lines) - 1
    if n == 0:
        raise DataError("line 2: dataset has no samples")
    features = np.empty((n, n_features))
    observed = np.full((n, n_labels), UNKNOWN, dtype=np.int8)
    truth = np.zeros((n, n_labels), dtype=np.int8)
    for i in range(n):
        line_no = i + 2
        row = parse(line_no)
        if set(row) != {"x", "pos", "neg", "truth"}:
            raise DataError(f"line {line_no}: row must have exactly x/pos/neg/truth")
        x = row["x"]
        if not isinstance(x, list) or len(x) != n_features:
            raise DataError(f"line {line_no}: 'x' must have {n_features} values")
        try:
            features[i] = [float(v) for v in x]
        except (TypeError, ValueError) as exc:
            raise DataError(f"line {line_no}: 'x' has a non-numeric value") from exc
        pos = _index_list(row["pos"], n_labels, line_no, "pos")
        neg = _index_list(row["neg"], n_labels, line_no, "neg")
        if set(pos) & set(neg):
            raise DataError(f"line {line_no}: pos and neg overlap")
        tru = _index_list(row["truth"], n_labels, line_no, "truth")
        observed[i, pos] = POSITIVE
        observed[i, neg] = NEGATIVE
        truth[i, tru] = 1
    try:
        return Dataset(features, observed, truth)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
