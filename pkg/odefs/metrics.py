"""
Metrics used to evaluate outlier scores against ground truth labels.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from odefs.data import FloatArray, IntArray
from odefs.errors import MetricError


@dataclass(frozen=True)
class MetricReport:
    auc: float
    precision_at_k: float
    k: int


def _check(scores: FloatArray, labels: IntArray) -> tuple[FloatArray, IntArray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 1 or scores.shape != labels.shape:
        raise MetricError(f"scores {scores.shape} and labels {labels.shape} must be vectors of equal length")
    if not np.all(np.isin(labels, (0, 1))):
        raise MetricError("labels must be 0 or 1")
    return scores, labels.astype(np.int64)


def auc(scores: FloatArray, labels: IntArray) -> float:
    """
    ROC AUC as the probability that a random outlier outranks a random inlier, ties counting one half.

    Computed from the Mann-Whitney rank sum with average ranks for ties.

    Args:
        scores (FloatArray): Outlier scores, higher is more outlying.
        labels (IntArray): Ground truth, 1 marks an outlier.

    Returns:
        float: The AUC in [0, 1].

    Raises:
        MetricError: If the labels contain a single class.
    """
    scores, labels = _check(scores, labels)
    positives = int(labels.sum())
    negatives = len(labels) - positives
    if positives == 0 or negatives == 0:
        raise MetricError("AUC needs at least one outlier and one inlier label")

    ranks = rankdata(scores)
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - positives * (positives + 1) / 2) / (positives * negatives)


def rank_scores(scores: FloatArray) -> IntArray:
    """Rank 1 for the highest score, ties broken by the lowest object index."""
    scores = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((np.arange(len(scores)), -scores))
    ranks = np.empty(len(scores), dtype=np.int64)
    ranks[order] = np.arange(1, len(scores) + 1)
    return ranks


def precision_at_k(scores: FloatArray, labels: IntArray, k: int | None = None) -> float:
    """
    Fraction of labeled outliers among the k highest scored objects.

    Args:
        scores (FloatArray): Outlier scores.
        labels (IntArray): Ground truth, 1 marks an outlier.
        k (int, optional): Size of the top block, the number of labeled outliers by default.

    Returns:
        float: p@k in [0, 1].

    Raises:
        MetricError: If k is not in [1, n].
    """
    scores, labels = _check(scores, labels)
    k = int(labels.sum()) if k is None else k
    if not 1 <= k <= len(scores):
        raise MetricError(f"k must lie in [1, {len(scores)}], got {k}")

    top = rank_scores(scores) <= k
    return float(labels[top].mean())


def evaluate(scores: FloatArray, labels: IntArray, k: int | None = None) -> MetricReport:
    k = int(np.sum(labels)) if k is None else k
    return MetricReport(auc=auc(scores, labels), precision_at_k=precision_at_k(scores, labels, k), k=k)
