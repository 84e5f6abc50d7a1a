import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import numpy.typing as npt
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from odefs.errors import DataError

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]


def _frozen(array: npt.NDArray[np.generic]) -> npt.NDArray[np.generic]:
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class Dataset:
    """An n x d real valued data matrix.

    Attributes:
        values (FloatArray): The n x d data matrix, read-only.
        feature_names (tuple[str, ...]): One name per column.
        labels (IntArray | None): Optional ground truth, 1 marks an outlier. Only used for evaluation.
    """

    values: FloatArray
    feature_names: tuple[str, ...]
    labels: IntArray | None = None

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError(f"values must be a 2-d matrix, got {values.ndim} dimension(s)")
        n, d = values.shape
        if n < 2 or d < 1:
            raise DataError(f"a dataset needs at least 2 objects and 1 feature, got {n}x{d}")
        if not np.all(np.isfinite(values)):
            raise DataError("every value must be finite")
        if len(self.feature_names) != d:
            raise DataError(f"expected {d} feature names, got {len(self.feature_names)}")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

        if self.labels is not None:
            labels = np.array(self.labels)
            if labels.shape != (n,):
                raise DataError(f"expected {n} labels, got shape {labels.shape}")
            if not np.all(np.isin(labels, (0, 1))):
                raise DataError("labels must be 0 or 1")
            object.__setattr__(self, "labels", _frozen(labels.astype(np.int64)))

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def d(self) -> int:
        return int(self.values.shape[1])

    @property
    def n_outliers(self) -> int:
        return 0 if self.labels is None else int(self.labels.sum())


@dataclass(frozen=True)
class NormalizationParams:
    minimum: FloatArray
    maximum: FloatArray = field(repr=False)


class SyntheticSpec(BaseModel):
    """Noisy Gaussian benchmark: outliers differ from inliers only in the first d_relevant features.

    Attributes:
        n (int): Number of objects.
        d (int): Number of features.
        d_relevant (int): Number of relevant features, placed first.
        outlier_fraction (float): Fraction of objects drawn as outliers.
        inlier_mean (float): Mean of every inlier feature and of every noise feature.
        outlier_mean (float): Mean of the relevant features of outliers.
        std (float): Standard deviation of every feature.
        seed (int): Seed of the generator.
    """

    n: int = Field(default=10000, ge=2)
    d: int = Field(default=100, ge=1)
    d_relevant: int = Field(default=20, ge=1)
    outlier_fraction: float = Field(default=0.02, gt=0.0, lt=0.5)
    inlier_mean: float = 1.0
    outlier_mean: float = 1.2
    std: float = Field(default=0.2, gt=0.0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_counts(self) -> "SyntheticSpec":
        if self.d_relevant > self.d:
            raise ValueError(f"d_relevant ({self.d_relevant}) must not exceed d ({self.d})")
        if not 0 < self.n_outliers < self.n:
            raise ValueError(f"outlier_fraction * n must round to a count in (0, {self.n}), got {self.n_outliers}")
        return self

    @property
    def n_outliers(self) -> int:
        return round(self.outlier_fraction * self.n)


def load_csv(path: Path | str, label_column: str | None = None) -> Dataset:
    """
    Load a dataset from a comma separated file with a header row.

    Args:
        path (Path | str): The CSV file.
        label_column (str, optional): Name of a 0/1 column holding ground truth labels. It is removed from the
            feature matrix.

    Returns:
        Dataset: The values in file row order.

    Raises:
        DataError: If the file is missing, rows are ragged, a cell is not a finite real or a label is not 0/1.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")

    # The header is read as a data row, so no row can turn into an implicit index and every long row is an error
    try:
        raw = pd.read_csv(
            path, header=None, dtype=str, keep_default_na=False, skipinitialspace=True, encoding="utf-8"
        )
    except pd.errors.EmptyDataError as error:
        raise DataError(f"{path}: file is empty") from error
    except pd.errors.ParserError as error:
        raise DataError(f"{path}: ragged rows ({error})") from error

    header = [str(name).strip() for name in raw.iloc[0]]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    frame = raw.iloc[1:].reset_index(drop=True)
    frame.columns = header

    # Short rows are padded with NaN by the parser, explicit empty cells stay ""
    ragged_rows = np.flatnonzero(frame.isna().any(axis=1).to_numpy())
    if len(ragged_rows):
        raise DataError(f"{path}: line {ragged_rows[0] + 2} has fewer fields than the header")

    parsed = {}
    for column in frame.columns:
        cells = frame[column].str.strip()
        numbers = pd.to_numeric(cells, errors="coerce").to_numpy(dtype=np.float64)
        bad = np.flatnonzero(~np.isfinite(numbers))
        if len(bad):
            row = bad[0]
            raise DataError(
                f"{path}: line {row + 2}, column {column!r}: cannot parse {cells.iloc[row]!r} as a finite real"
            )
        parsed[column] = numbers

    labels = None
    if label_column is not None:
        if label_column not in parsed:
            raise DataError(f"{path}: label column {label_column!r} not found in header")
        raw_labels = parsed.pop(label_column)
        bad = np.flatnonzero(~np.isin(raw_labels, (0.0, 1.0)))
        if len(bad):
            raise DataError(
                f"{path}: line {bad[0] + 2}, column {label_column!r}: label {raw_labels[bad[0]]!r} is not 0 or 1"
            )
        labels = raw_labels.astype(np.int64)

    if not parsed:
        raise DataError(f"{path}: no feature columns")

    names = tuple(parsed)
    values = np.column_stack([parsed[name] for name in names]) if len(frame) else np.empty((0, len(names)))
    dataset = Dataset(values=values, feature_names=names, labels=labels)
    logger.info(f"Loaded {path}: n={dataset.n}, d={dataset.d}, labels={'yes' if labels is not None else 'no'}")
    return dataset


def write_csv(data: Dataset, path: Path | str, label_column: str = "label") -> None:
    """Write a dataset as CSV, appending the labels as the last column when present."""
    frame = pd.DataFrame(data.values, columns=list(data.feature_names))
    if data.labels is not None:
        frame[label_column] = data.labels
    frame.to_csv(path, index=False, lineterminator="\n")


def minmax_normalize(data: Dataset) -> tuple[Dataset, NormalizationParams]:
    """
    Map every feature onto [0, 1] with (x - min) / (max - min).

    Constant features are mapped to 0 everywhere, which makes them contribute nothing to any distance.

    Args:
        data (Dataset): The dataset to normalize.

    Returns:
        tuple[Dataset, NormalizationParams]: The normalized dataset (labels preserved) and the per-feature range.
    """
    minimum = data.values.min(axis=0)
    maximum = data.values.max(axis=0)
    span = maximum - minimum
    constant = span <= 0

    safe_span = np.where(constant, 1.0, span)
    values = np.where(constant, 0.0, (data.values - minimum) / safe_span)

    if constant.any():
        logger.info(f"{int(constant.sum())} constant feature(s) normalized to zero")

    return (
        Dataset(values=values, feature_names=data.feature_names, labels=data.labels),
        NormalizationParams(minimum=minimum, maximum=maximum),
    )


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """
    Draw the noisy Gaussian benchmark.

    Relevant features of outliers follow N(outlier_mean, std), everything else follows N(inlier_mean, std). The
    relevant features are the first ``d_relevant`` columns; object order is shuffled.

    Args:
        spec (SyntheticSpec): The benchmark description.

    Returns:
        Dataset: A labeled dataset, bit-identical for identical specs.
    """
    rng = np.random.default_rng(spec.seed)
    n_out = spec.n_outliers

    values = rng.normal(spec.inlier_mean, spec.std, size=(spec.n, spec.d))
    values[:n_out, : spec.d_relevant] = rng.normal(spec.outlier_mean, spec.std, size=(n_out, spec.d_relevant))
    labels = np.zeros(spec.n, dtype=np.int64)
    labels[:n_out] = 1

    order = rng.permutation(spec.n)
    names = [f"f{k}" for k in range(spec.d)]

    logger.debug(f"Generated synthetic data n={spec.n} d={spec.d} relevant={spec.d_relevant} outliers={n_out}")
    return Dataset(values=values[order], feature_names=tuple(names), labels=labels[order])


def relevant_features(spec: SyntheticSpec) -> Sequence[int]:
    return range(spec.d_relevant)
