import logging
from typing import Iterable

import numpy as np
from pydantic import BaseModel, Field

from odefs.data import Dataset, FloatArray, IntArray
from odefs.errors import ConfigError, DataError
from odefs.utils import chunks

from .base import OutlierDetector, PreparedRows, check_features, check_weights

logger = logging.getLogger(__name__)

# Upper bound on the floats of one residual block (rows x subset members x features)
BLOCK_FLOATS = 1 << 22


def weighted_distance(x: FloatArray, y: FloatArray, w: FloatArray) -> float:
    """
    Weighted squared Euclidean distance ``sum_k w_k (x_k - y_k)^2``.

    Raises:
        DataError: If the dimensions of x, y and w disagree.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if not x.shape == y.shape == w.shape or x.ndim != 1:
        raise DataError(f"dimension mismatch: x {x.shape}, y {y.shape}, w {w.shape}")
    return float(((x - y) ** 2) @ w)


class LesinnDetector(OutlierDetector):
    """
    LeSiNN: average nearest neighbour distance to c random subsamples of the data.

    The distance is the feature weighted squared Euclidean distance. Each subset is stored sorted, so the first
    minimum along a subset is the nearest member with the lowest object index. When a dataset row is scored its own
    index is excluded from every subset; a subset left empty by the exclusion does not take part in the average.

    Attributes:
        subsets (IntArray): c x subsample_size object indices, each row sorted and without repeats.
        seed (int): The seed the subsets were drawn with.
    """

    name = "LeSiNN"
    description = (
        "Distance based detector scoring an object by its mean nearest neighbour distance to an ensemble of small"
        " random subsamples of the data."
    )

    class Config(BaseModel):
        """Configuration for the LesinnDetector.

        Attributes:
            c (int): Number of random subsets.
            subsample_size (int): Objects per subset.
        """

        c: int = Field(default=50, ge=1)
        subsample_size: int = Field(default=8, ge=1)

    def __init__(self, data: Dataset, subsets: IntArray, seed: int = 0) -> None:
        super().__init__(data)
        subsets = np.sort(np.asarray(subsets, dtype=np.int64), axis=1)
        if subsets.ndim != 2 or subsets.shape[0] < 1 or subsets.shape[1] < 1:
            raise ConfigError("LeSiNN needs at least one non-empty subset")
        if subsets.min() < 0 or subsets.max() >= data.n:
            raise ConfigError(f"subset indices must lie in [0, {data.n})")
        if np.any(np.diff(subsets, axis=1) == 0):
            raise ConfigError("subset members must be distinct")

        subsets.flags.writeable = False
        self.subsets = subsets
        self.seed = seed
        self._members = subsets.ravel()
        self._points = data.values[self._members]

    @classmethod
    def build(cls, data: Dataset, c: int = 50, subsample_size: int = 8, seed: int = 0) -> "LesinnDetector":
        """
        Draw c subsets of subsample_size distinct objects.

        Args:
            data (Dataset): The dataset to build over.
            c (int): Number of subsets.
            subsample_size (int): Objects per subset.
            seed (int): Seed of the draw.

        Returns:
            LesinnDetector: The detector, identical for identical seeds.

        Raises:
            ConfigError: If subsample_size is not in [1, n] or c < 1.
        """
        if c < 1:
            raise ConfigError(f"c must be at least 1, got {c}")
        if not 1 <= subsample_size <= data.n:
            raise ConfigError(f"subsample_size must lie in [1, {data.n}], got {subsample_size}")

        rng = np.random.default_rng(seed)
        subsets = np.stack([rng.choice(data.n, size=subsample_size, replace=False) for _ in range(c)])
        logger.debug(f"Built LeSiNN with c={c}, subsample_size={subsample_size}, seed={seed}")
        return cls(data, subsets, seed)

    @property
    def c(self) -> int:
        return int(self.subsets.shape[0])

    @property
    def subsample_size(self) -> int:
        return int(self.subsets.shape[1])

    def _block_rows(self, d: int) -> int:
        return max(1, BLOCK_FLOATS // (len(self._members) * max(d, 1)))

    def _residuals(self, queries: FloatArray, points: FloatArray | None = None) -> FloatArray:
        """Squared per-feature differences of every query to every subset member (b x c*s x d)."""
        points = self._points if points is None else points
        return (queries[:, None, :] - points[None, :, :]) ** 2  # type: ignore[no-any-return]

    def _nearest(
        self, residuals: FloatArray, w: FloatArray, exclude: IntArray | None
    ) -> tuple[FloatArray, IntArray, FloatArray]:
        """
        Find the nearest member of every subset.

        Returns:
            tuple: Nearest distances (b x c, inf where a subset has no usable member), positions of the nearest
                members inside their subsets (b x c) and the number of usable subsets per query (b,).
        """
        distances = residuals @ w
        if exclude is not None:
            distances = np.where(exclude[:, None] == self._members[None, :], np.inf, distances)

        distances = distances.reshape(len(residuals), self.c, self.subsample_size)
        positions = distances.argmin(axis=2)
        nearest = np.take_along_axis(distances, positions[..., None], axis=2)[..., 0]
        usable = np.isfinite(nearest).sum(axis=1).astype(np.float64)
        return nearest, positions, usable

    def _scores(self, residuals: FloatArray, w: FloatArray, exclude: IntArray | None) -> FloatArray:
        nearest, _, usable = self._nearest(residuals, w, exclude)
        total = np.where(np.isfinite(nearest), nearest, 0.0).sum(axis=1)
        return total / np.maximum(usable, 1.0)  # type: ignore[no-any-return]

    def _scores_and_gradients(
        self, residuals: FloatArray, w: FloatArray, exclude: IntArray | None
    ) -> tuple[FloatArray, FloatArray]:
        nearest, positions, usable = self._nearest(residuals, w, exclude)
        finite = np.isfinite(nearest)
        scale = np.maximum(usable, 1.0)
        scores = np.where(finite, nearest, 0.0).sum(axis=1) / scale

        b, d = len(residuals), residuals.shape[2]
        per_subset = residuals.reshape(b, self.c, self.subsample_size, d)
        chosen = np.take_along_axis(per_subset, positions[..., None, None], axis=2)[:, :, 0, :]
        gradients = (chosen * finite[..., None]).sum(axis=1) / scale[:, None]
        return scores, gradients

    def score(self, x: FloatArray, w: FloatArray, index: int | None = None) -> float:
        """
        Mean over subsets of the weighted distance from x to its nearest subset member.

        Args:
            x (FloatArray): The object to score.
            w (FloatArray): Non-negative feature weights.
            index (int, optional): Row of x in the dataset, excluded from every subset.

        Returns:
            float: The outlier score, 0 when every subset contains a copy of x.
        """
        w = check_weights(w, self.d)
        residuals = self._residuals(self._query(x))
        return float(self._scores(residuals, w, self._exclude(index))[0])

    def score_gradient(self, x: FloatArray, w: FloatArray, index: int | None = None) -> FloatArray:
        """
        Subgradient of :meth:`score` with respect to w.

        Nearest neighbours are fixed at the current w, so this is the exact gradient wherever every nearest
        neighbour is unique: ``(1/c) sum_i (x_k - y*_ik)^2`` per feature k.
        """
        w = check_weights(w, self.d)
        residuals = self._residuals(self._query(x))
        return self._scores_and_gradients(residuals, w, self._exclude(index))[1][0]

    def score_subset(self, x: FloatArray, features: Iterable[int], index: int | None = None) -> float:
        selected = check_features(features, self.d)
        query = self._query(x)[:, selected]
        residuals = self._residuals(query, self._points[:, selected])
        return float(self._scores(residuals, np.ones(len(selected)), self._exclude(index))[0])

    def score_rows(self, w: FloatArray, rows: IntArray | None = None) -> FloatArray:
        w = check_weights(w, self.d)
        return self._score_rows(self._rows(rows), w, slice(None))

    def score_rows_subset(self, features: Iterable[int], rows: IntArray | None = None) -> FloatArray:
        selected = check_features(features, self.d)
        return self._score_rows(self._rows(rows), np.ones(len(selected)), selected)

    def _score_rows(self, rows: IntArray, w: FloatArray, features: IntArray | slice) -> FloatArray:
        values = self.data.values[:, features]
        points = self._points[:, features]
        scores = np.empty(len(rows))
        for block in chunks(len(rows), self._block_rows(values.shape[1])):
            residuals = self._residuals(values[rows[block]], points)
            scores[block] = self._scores(residuals, w, rows[block])
        return scores

    def prepare(self, rows: IntArray) -> "PreparedLesinnRows":
        return PreparedLesinnRows(self, self._rows(rows))

    def _rows(self, rows: IntArray | None) -> IntArray:
        if rows is None:
            return np.arange(self.data.n)
        rows = np.asarray(rows, dtype=np.int64)
        if rows.ndim != 1 or (rows.size and (rows.min() < 0 or rows.max() >= self.data.n)):
            raise DataError(f"row indices must lie in [0, {self.data.n})")
        return rows

    def _query(self, x: FloatArray) -> FloatArray:
        query = np.asarray(x, dtype=np.float64)
        if query.shape != (self.d,):
            raise DataError(f"dimension mismatch: expected a {self.d}-vector, got shape {query.shape}")
        return query[None, :]

    @staticmethod
    def _exclude(index: int | None) -> IntArray | None:
        return None if index is None else np.array([index], dtype=np.int64)


class PreparedLesinnRows(PreparedRows):
    """
    Dataset rows with their residuals to every subset member cached.

    The cache holds rows x c*s x d floats; blocks that would exceed the budget are recomputed on every call instead.
    """

    cache_floats: int = 1 << 25

    def __init__(self, detector: LesinnDetector, rows: IntArray) -> None:
        self.detector = detector
        self.rows = rows
        size = len(rows) * len(detector._members) * detector.d
        self._cached = detector._residuals(detector.data.values[rows]) if size <= self.cache_floats else None

    def _blocks(self) -> Iterable[tuple[slice, FloatArray]]:
        if self._cached is not None:
            yield slice(None), self._cached
            return
        detector = self.detector
        for block in chunks(len(self.rows), detector._block_rows(detector.d)):
            yield block, detector._residuals(detector.data.values[self.rows[block]])

    def scores(self, w: FloatArray) -> FloatArray:
        w = check_weights(w, self.detector.d)
        scores = np.empty(len(self.rows))
        for block, residuals in self._blocks():
            scores[block] = self.detector._scores(residuals, w, self.rows[block])
        return scores

    def scores_and_gradients(self, w: FloatArray) -> tuple[FloatArray, FloatArray]:
        w = check_weights(w, self.detector.d)
        scores = np.empty(len(self.rows))
        gradients = np.empty((len(self.rows), self.detector.d))
        for block, residuals in self._blocks():
            scores[block], gradients[block] = self.detector._scores_and_gradients(residuals, w, self.rows[block])
        return scores, gradients
