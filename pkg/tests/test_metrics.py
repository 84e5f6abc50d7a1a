import numpy as np
import pytest

from odefs.errors import MetricError
from odefs.metrics import auc, evaluate, precision_at_k, rank_scores


def brute_force_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    outliers, inliers = scores[labels == 1], scores[labels == 0]
    wins = (outliers[:, None] > inliers[None, :]).sum() + 0.5 * (outliers[:, None] == inliers[None, :]).sum()
    return float(wins / (len(outliers) * len(inliers)))


class TestAuc:
    def test_perfect(self) -> None:
        assert auc(np.array([0.9, 0.8, 0.1, 0.2]), np.array([1, 1, 0, 0])) == 1.0

    def test_reversed(self) -> None:
        assert auc(np.array([0.1, 0.2, 0.9, 0.8]), np.array([1, 1, 0, 0])) == 0.0

    def test_all_tied(self) -> None:
        assert auc(np.ones(4), np.array([1, 0, 1, 0])) == 0.5

    @pytest.mark.parametrize("labels", [[0, 0, 0], [1, 1, 1]])
    def test_single_class(self, labels: list[int]) -> None:
        with pytest.raises(MetricError):
            auc(np.array([0.1, 0.2, 0.3]), np.array(labels))

    def test_shape_mismatch(self) -> None:
        with pytest.raises(MetricError):
            auc(np.array([0.1, 0.2]), np.array([0, 1, 0]))

    def test_matches_pair_counting(self) -> None:
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(2, 200))
            labels = rng.integers(0, 2, size=n)
            labels[:2] = [0, 1]
            scores = np.round(rng.normal(size=n), 1)
            assert auc(scores, labels) == pytest.approx(brute_force_auc(scores, labels), abs=1e-12)

    def test_invariant_under_monotone_maps(self) -> None:
        rng = np.random.default_rng(1)
        labels = rng.integers(0, 2, size=100)
        labels[:2] = [0, 1]
        scores = np.round(rng.uniform(size=100), 2)
        assert auc(np.exp(scores), labels) == auc(scores, labels)
        assert auc(3.0 * scores + 1.0, labels) == auc(scores, labels)


class TestPrecisionAtK:
    def test_examples(self) -> None:
        labels = np.array([1, 0, 1, 0])
        assert precision_at_k(np.array([0.9, 0.1, 0.8, 0.2]), labels) == 1.0
        assert precision_at_k(np.array([0.1, 0.9, 0.2, 0.8]), labels) == 0.0
        assert precision_at_k(np.array([0.9, 0.8, 0.1, 0.2]), labels, k=2) == 0.5

    def test_ties_broken_by_lowest_index(self) -> None:
        assert precision_at_k(np.array([1.0, 1.0, 0.0]), np.array([0, 1, 0]), k=1) == 0.0
        assert precision_at_k(np.array([1.0, 1.0, 0.0]), np.array([1, 0, 0]), k=1) == 1.0

    @pytest.mark.parametrize("k", [0, 5])
    def test_invalid_k(self, k: int) -> None:
        with pytest.raises(MetricError):
            precision_at_k(np.array([0.1, 0.2, 0.3, 0.4]), np.array([0, 1, 0, 1]), k=k)

    def test_no_outliers_default_k(self) -> None:
        with pytest.raises(MetricError):
            precision_at_k(np.array([0.1, 0.2]), np.array([0, 0]))


def test_rank_scores() -> None:
    np.testing.assert_array_equal(rank_scores(np.array([0.2, 0.9, 0.2, 0.5])), [3, 1, 4, 2])


def test_evaluate() -> None:
    report = evaluate(np.array([0.9, 0.1, 0.3, 0.2]), np.array([1, 0, 0, 1]))
    assert report.k == 2
    assert report.precision_at_k == 0.5
    assert report.auc == pytest.approx(0.75)
