import numpy as np
import pytest

from opml.labels import NEGATIVE, POSITIVE, UNKNOWN
from opml.metrics import (
    average_precision,
    mean_average_precision,
    observed_per_class_ap,
    positive_confidence_histogram,
)


def oracle_ap(scores, truth):
    """Exhaustive rank enumeration: precision at every rank, recounted from
    scratch, averaged over the ranks of the positives."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    total = 0.0
    n_pos = 0
    for k in range(1, len(order) + 1):
        if truth[order[k - 1]] == 1:
            n_pos += 1
            in_top_k = sum(1 for i in order[:k] if truth[i] == 1)
            total += in_top_k / k
    return total / n_pos


class TestAveragePrecision:
    def test_perfect_ranking(self):
        assert average_precision([0.9, 0.1], [1, 0]) == 1.0

    def test_positive_at_rank_two(self):
        assert average_precision([0.1, 0.9], [1, 0]) == 0.5

    def test_hand_enumerated(self):
        got = average_precision([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])
        assert got == pytest.approx(5 / 6, rel=1e-15)

    def test_matches_oracle_exhaustively(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            n = int(rng.integers(1, 9))
            scores = rng.uniform(-1, 1, size=n)
            if rng.random() < 0.3:  # inject ties
                scores = np.round(scores, 1)
            truth = (rng.random(n) < 0.5).astype(int)
            if truth.sum() == 0:
                truth[int(rng.integers(0, n))] = 1
            assert average_precision(scores, truth) == oracle_ap(
                scores.tolist(), truth.tolist()
            )

    def test_invariant_under_monotone_transforms(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            scores = rng.uniform(-3, 3, size=20)
            truth = (rng.random(20) < 0.4).astype(int)
            truth[0] = 1
            base = average_precision(scores, truth)
            for transform in (np.tanh, np.exp, lambda s: 3 * s + 11):
                assert average_precision(transform(scores), truth) == pytest.approx(
                    base, rel=1e-12
                )

    def test_range(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            scores = rng.normal(size=12)
            truth = (rng.random(12) < 0.3).astype(int)
            truth[3] = 1
            assert 0.0 < average_precision(scores, truth) <= 1.0

    def test_tie_break_by_sample_index(self):
        # equal scores rank in index order: the positive at index 0 wins
        assert average_precision([0.5, 0.5], [1, 0]) == 1.0
        assert average_precision([0.5, 0.5], [0, 1]) == 0.5

    def test_no_positive_is_error(self):
        with pytest.raises(ValueError):
            average_precision([0.1, 0.2], [0, 0])


class TestMeanAveragePrecision:
    def test_perfect_predictor(self):
        rng = np.random.default_rng(3)
        truth = (rng.random((30, 5)) < 0.4).astype(int)
        truth[:, 2] = 1  # keep every class populated somewhere
        report = mean_average_precision(truth.astype(float), truth)
        assert report.map == 1.0

    def test_constant_scores_use_index_order(self):
        truth = np.array([[1, 0], [0, 1]])
        report = mean_average_precision(np.zeros((2, 2)), truth)
        # class 0: positive at index 0 -> AP 1; class 1: at index 1 -> AP 0.5
        assert report.per_class_ap == [1.0, 0.5]
        assert report.map == 0.75

    def test_empty_classes_excluded(self):
        truth = np.array([[1, 0], [1, 0]])
        report = mean_average_precision(np.zeros((2, 2)), truth)
        assert report.evaluated_classes == [0]
        assert report.per_class_ap[1] == 0.0
        assert report.positives_per_class == [2, 0]
        assert report.map == 1.0

    def test_matches_oracle_per_class(self):
        rng = np.random.default_rng(4)
        scores = rng.normal(size=(50, 6))
        truth = (rng.random((50, 6)) < 0.3).astype(int)
        truth[0] = 1
        report = mean_average_precision(scores, truth)
        for l in report.evaluated_classes:
            assert report.per_class_ap[l] == oracle_ap(
                scores[:, l].tolist(), truth[:, l].tolist()
            )

    def test_all_classes_empty_is_error(self):
        with pytest.raises(ValueError):
            mean_average_precision(np.zeros((2, 2)), np.zeros((2, 2), dtype=int))


class TestObservedAp:
    def test_unknown_entries_excluded(self):
        obs = np.array([[POSITIVE], [UNKNOWN], [NEGATIVE]], dtype=np.int8)
        scores = np.array([[0.1], [9.9], [0.5]])
        # the unknown middle sample is invisible: ranking is [0.5, 0.1] with
        # the positive second -> AP = 0.5
        assert observed_per_class_ap(scores, obs)[0] == 0.5

    def test_class_without_observed_positive_scores_zero(self):
        obs = np.array([[NEGATIVE], [UNKNOWN]], dtype=np.int8)
        assert observed_per_class_ap(np.zeros((2, 1)), obs)[0] == 0.0


class TestConfidenceHistogram:
    def test_all_mass_in_last_bin(self):
        pred = np.ones((3, 2))
        truth = np.array([[1, 0], [1, 1], [0, 0]])
        hist = positive_confidence_histogram(pred, truth, 0.2)
        assert hist.tolist() == [0, 0, 0, 0, 3]

    def test_five_bins_at_standard_width(self):
        hist = positive_confidence_histogram(
            np.array([[0.0]]), np.array([[1]]), 0.2
        )
        assert hist.size == 5

    def test_counts_conserve_positives(self):
        rng = np.random.default_rng(5)
        pred = rng.random((40, 6))
        truth = (rng.random((40, 6)) < 0.3).astype(int)
        hist = positive_confidence_histogram(pred, truth, 0.2)
        assert hist.sum() == truth.sum()

    def test_bin_edges_left_closed(self):
        # each edge value belongs to the bin it opens
        pred = np.array([[0.0, 0.2, 0.4, 0.8]])
        truth = np.array([[1, 1, 1, 1]])
        hist = positive_confidence_histogram(pred, truth, 0.2)
        assert hist.tolist() == [1, 1, 1, 0, 1]

    def test_bad_bin_width(self):
        with pytest.raises(ValueError, match="divide"):
            positive_confidence_histogram(np.array([[0.5]]), np.array([[1]]), 0.3)
