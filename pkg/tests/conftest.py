import numpy as np
import pytest

from odefs.data import Dataset, FloatArray, IntArray, SyntheticSpec, generate_synthetic, minmax_normalize
from odefs.detectors import LesinnDetector, OutlierDetector, PreparedRows, check_weights


class LinearDetector(OutlierDetector):
    """Scores an object by ``w @ x``; makes score gaps easy to dial in."""

    name = "Linear"
    description = "Weighted sum of the features."

    def __init__(self, data: Dataset) -> None:
        super().__init__(data)

    def score(self, x: FloatArray, w: FloatArray, index: int | None = None) -> float:
        return float(np.asarray(x) @ check_weights(w, self.d))

    def score_gradient(self, x: FloatArray, w: FloatArray, index: int | None = None) -> FloatArray:
        return np.asarray(x, dtype=np.float64)

    def score_rows(self, w: FloatArray, rows: IntArray | None = None) -> FloatArray:
        rows = np.arange(self.data.n) if rows is None else rows
        return self.data.values[rows] @ check_weights(w, self.d)  # type: ignore[no-any-return]

    def prepare(self, rows: IntArray) -> PreparedRows:
        detector = self

        class Prepared(PreparedRows):
            def scores(self, w: FloatArray) -> FloatArray:
                return detector.score_rows(w, rows)

            def scores_and_gradients(self, w: FloatArray) -> tuple[FloatArray, FloatArray]:
                return detector.score_rows(w, rows), detector.data.values[rows]

        return Prepared()


def make_dataset(rows: list[list[float]], labels: list[int] | None = None) -> Dataset:
    values = np.array(rows, dtype=np.float64)
    names = tuple(f"f{k}" for k in range(values.shape[1]))
    return Dataset(values=values, feature_names=names, labels=None if labels is None else np.array(labels))


@pytest.fixture
def small_synthetic() -> Dataset:
    spec = SyntheticSpec(n=300, d=10, d_relevant=3, outlier_fraction=0.05, seed=11)
    return minmax_normalize(generate_synthetic(spec))[0]


@pytest.fixture
def small_detector(small_synthetic: Dataset) -> LesinnDetector:
    return LesinnDetector.build(small_synthetic, c=10, subsample_size=8, seed=3)
