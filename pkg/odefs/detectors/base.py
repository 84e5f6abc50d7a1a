from abc import ABCMeta, abstractmethod
from typing import Iterable

import numpy as np

from odefs.data import Dataset, FloatArray, IntArray


def check_weights(w: Iterable[float] | FloatArray, d: int) -> FloatArray:
    """
    Validate a feature weight vector.

    Args:
        w (FloatArray): The candidate weights.
        d (int): The expected number of features.

    Returns:
        FloatArray: The weights as a float64 vector.

    Raises:
        ValueError: If the length is not d, or any weight is negative or not finite.
    """
    weights = np.asarray(w, dtype=np.float64)
    if weights.shape != (d,):
        raise ValueError(f"expected {d} feature weights, got shape {weights.shape}")
    if not np.all(np.isfinite(weights)) or np.any(weights < 0):
        raise ValueError("feature weights must be finite and non-negative")
    return weights


def indicator(features: Iterable[int], d: int) -> FloatArray:
    """Return the 0/1 weight vector of a feature set."""
    selected = check_features(features, d)
    weights = np.zeros(d)
    weights[selected] = 1.0
    return weights


def check_features(features: Iterable[int], d: int) -> IntArray:
    selected = np.unique(np.asarray(list(features), dtype=np.int64))
    if selected.size == 0:
        raise ValueError("feature set must not be empty")
    if selected[0] < 0 or selected[-1] >= d:
        raise ValueError(f"feature indices must lie in [0, {d})")
    return selected


class PreparedRows(metaclass=ABCMeta):
    """
    A fixed block of dataset rows prepared for repeated scoring under changing weights.

    Training evaluates the same batch under many weight vectors, so detectors may cache whatever does not depend on
    the weights here.
    """

    @abstractmethod
    def scores(self, w: FloatArray) -> FloatArray:
        """Score every prepared row under the weights ``w``."""
        ...

    @abstractmethod
    def scores_and_gradients(self, w: FloatArray) -> tuple[FloatArray, FloatArray]:
        """Return the scores (r,) and their (sub)gradients with respect to ``w`` (r x d)."""
        ...


class OutlierDetector(metaclass=ABCMeta):
    """
    Abstract base class for feature weighted outlier detectors.

    A detector is built over one dataset and scores objects under a non-negative feature weight vector. Higher scores
    mean more outlying. All weight vectors of length d that are finite and non-negative are valid.

    Attributes:
        name (str): The name of the detector.
        description (str): A brief description of the detector.
        data (Dataset): The dataset the detector was built over.
    """

    name: str
    description: str

    @abstractmethod
    def __init__(self, data: Dataset) -> None:
        if not all(hasattr(self, attr) for attr in ("name", "description")):
            raise NotImplementedError("All required attributes must be provided by the subclass.")

        self.data = data

    @property
    def d(self) -> int:
        return self.data.d

    @abstractmethod
    def score(self, x: FloatArray, w: FloatArray, index: int | None = None) -> float:
        """
        Score one object.

        Args:
            x (FloatArray): The object, a d-vector.
            w (FloatArray): The feature weights.
            index (int, optional): The row of ``x`` in the dataset. Detectors use it to exclude self matches.

        Returns:
            float: The outlier score.
        """
        ...

    @abstractmethod
    def score_gradient(self, x: FloatArray, w: FloatArray, index: int | None = None) -> FloatArray:
        """Return the (sub)gradient of :meth:`score` with respect to ``w``."""
        ...

    @abstractmethod
    def score_rows(self, w: FloatArray, rows: IntArray | None = None) -> FloatArray:
        """Score dataset rows (all rows by default), excluding each row's self match."""
        ...

    @abstractmethod
    def prepare(self, rows: IntArray) -> PreparedRows:
        """Prepare dataset rows for repeated scoring, see :class:`PreparedRows`."""
        ...

    def score_subset(self, x: FloatArray, features: Iterable[int], index: int | None = None) -> float:
        """Score one object using only the given features, equal to :meth:`score` under their indicator."""
        return self.score(x, indicator(features, self.d), index)

    def score_rows_subset(self, features: Iterable[int], rows: IntArray | None = None) -> FloatArray:
        return self.score_rows(indicator(features, self.d), rows)
