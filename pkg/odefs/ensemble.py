import asyncio
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import softmax

from odefs.data import Dataset, FloatArray, IntArray
from odefs.detectors import LesinnDetector, OutlierDetector, initiate_detector
from odefs.errors import DegenerateComponentError, EmptyCandidatesError, EnsembleError
from odefs.thresholding import CandidateSet, select_candidates
from odefs.training import TraceRow, TrainingBatch, TrainOptions, train_component
from odefs.utils import derive_seed, run_coroutine

logger = logging.getLogger(__name__)

LARGE_DATASET = 10_000


class OdefsParams(BaseModel):
    """Parameters of one ensemble run.

    Attributes:
        a (float): Thresholding rate of the candidate selection.
        m_star (int, optional): Outlier examples per component, 32 up to 10^4 objects and 64 above when unset.
        unlabeled_ratio (int): Unlabeled examples per outlier example, m = unlabeled_ratio * m_star.
        ensemble_size_override (int, optional): Number of components, 2 * ceil(n_star / m_star) when unset.
        epsilon (float): Relative weight a feature needs to be selected.
        train_options (TrainOptions): Options of every component's optimisation.
        detector (str): The base detector.
        lesinn (LesinnDetector.Config): LeSiNN settings.
        seed (int): Root seed of the run.
        workers (int): Components trained concurrently.
    """

    a: float = Field(default=2.0, ge=0.0)
    m_star: int | None = Field(default=None, ge=1)
    unlabeled_ratio: int = Field(default=6, ge=1)
    ensemble_size_override: int | None = Field(default=None, ge=1)
    epsilon: float = Field(default=0.05, gt=0.0, lt=1.0)
    train_options: TrainOptions = Field(default_factory=TrainOptions)
    detector: Literal["lesinn"] = "lesinn"
    lesinn: LesinnDetector.Config = Field(default_factory=LesinnDetector.Config)
    seed: int = 0
    workers: int = Field(default=1, ge=1)

    def resolve_m_star(self, n: int) -> int:
        if self.m_star is not None:
            return self.m_star
        return 32 if n <= LARGE_DATASET else 64

    def ensemble_size(self, n_star: int, m_star: int) -> int:
        if self.ensemble_size_override is not None:
            return self.ensemble_size_override
        return 2 * math.ceil(n_star / m_star)


@dataclass(frozen=True)
class ComponentResult:
    """A trained ensemble component.

    Attributes:
        index (int): Position of the component in the ensemble.
        feature_set (tuple[int, ...]): The selected features.
        loss (float): Final self-paced objective of the component.
        w (FloatArray): The learned feature weights.
        lam (float): Final age parameter.
        iterations (int): Outer iterations run.
        converged (bool): Whether training met the tolerance.
        trace (list[TraceRow]): Training diagnostics.
    """

    index: int
    feature_set: tuple[int, ...]
    loss: float
    w: FloatArray = field(repr=False)
    lam: float = 0.0
    iterations: int = 0
    converged: bool = False
    trace: list[TraceRow] = field(default_factory=list, repr=False)

    @property
    def selected_count(self) -> int:
        return len(self.feature_set)


@dataclass(frozen=True)
class EnsembleModel:
    """The trained ensemble.

    Attributes:
        components (list[ComponentResult]): Surviving components in index order.
        aggregation_weights (FloatArray): Softmax of the negated component losses.
        candidate_set (CandidateSet): The thresholded outlier candidates.
        m_star (int): Outlier examples per component.
        m (int): Unlabeled examples per component.
        ensemble_size (int): Components trained, including dropped ones.
    """

    components: list[ComponentResult]
    aggregation_weights: FloatArray
    candidate_set: CandidateSet
    m_star: int
    m: int
    ensemble_size: int

    @property
    def mean_selected_count(self) -> float:
        return float(np.mean([component.selected_count for component in self.components]))

    def summary(self) -> dict[str, Any]:
        return {
            "candidates": self.candidate_set.summary(),
            "m_star": self.m_star,
            "m": self.m,
            "ensemble_size": self.ensemble_size,
            "mean_selected_count": self.mean_selected_count,
            "components": [
                {
                    "index": component.index,
                    "features": list(component.feature_set),
                    "selected_count": component.selected_count,
                    "loss": component.loss,
                    "weight": float(weight),
                    "lambda": component.lam,
                    "iterations": component.iterations,
                    "converged": component.converged,
                }
                for component, weight in zip(self.components, self.aggregation_weights)
            ],
        }


def sample_batch(data: Dataset, candidates: CandidateSet, m_star: int, m: int, seed: int) -> TrainingBatch:
    """
    Draw one component's training examples.

    Outlier examples come from the candidates, without replacement when there are enough of them and with
    replacement otherwise. Unlabeled examples come from all objects without replacement; m is capped at n.

    Raises:
        EmptyCandidatesError: If there are no candidates.
    """
    if len(candidates) == 0:
        raise EmptyCandidatesError(f"no outlier candidates above mu + {candidates.a} * sigma, lower a")

    rng = np.random.default_rng(seed)
    outliers = rng.choice(candidates.indices, size=m_star, replace=len(candidates) < m_star)
    unlabeled = rng.choice(data.n, size=min(m, data.n), replace=False)
    return TrainingBatch(outlier_examples=outliers.astype(np.int64), unlabeled_examples=unlabeled.astype(np.int64))


def select_features(w: FloatArray, epsilon: float = 0.05) -> IntArray:
    """
    Select the features whose weight relative to the largest weight exceeds epsilon.

    Raises:
        DegenerateComponentError: If every weight is zero.
    """
    w = np.asarray(w, dtype=np.float64)
    top = float(w.max()) if w.size else 0.0
    if top <= 0:
        raise DegenerateComponentError("all feature weights are zero")
    return np.flatnonzero(w / top > epsilon)


def normalize_scores(raw: FloatArray) -> FloatArray:
    """
    Divide non-negative scores by their sum.

    Raises:
        DegenerateComponentError: If every score is zero.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if np.any(raw < 0):
        raise ValueError("scores must be non-negative")
    total = float(raw.sum())
    if total <= 0:
        raise DegenerateComponentError("all subset scores are zero")
    return raw / total


def aggregation_weights(losses: FloatArray) -> FloatArray:
    """Boosting style component weights ``exp(-loss_j) / sum_k exp(-loss_k)``."""
    return softmax(-np.asarray(losses, dtype=np.float64))  # type: ignore[no-any-return]


def _component(
    index: int,
    data: Dataset,
    detector: OutlierDetector,
    candidates: CandidateSet,
    params: OdefsParams,
    m_star: int,
    m: int,
) -> tuple[ComponentResult, FloatArray] | None:
    batch = sample_batch(data, candidates, m_star, m, derive_seed(params.seed, "batch", index))
    options = params.train_options.model_copy(update={"seed": derive_seed(params.seed, "component", index)})
    state = train_component(batch, detector, options)

    try:
        features = select_features(state.w, params.epsilon)
        normalized = normalize_scores(detector.score_rows_subset(features))
    except DegenerateComponentError as error:
        logger.warning(f"Dropping component {index}: {error}")
        return None

    result = ComponentResult(
        index=index,
        feature_set=tuple(int(feature) for feature in features),
        loss=state.final_loss,
        w=state.w,
        lam=state.lam,
        iterations=state.iteration,
        converged=state.converged,
        trace=state.trace,
    )
    logger.info(
        f"Component {index}: loss={result.loss:.6g} features={result.selected_count} iterations={state.iteration}"
    )
    return result, normalized


async def _train_components(
    data: Dataset,
    detector: OutlierDetector,
    candidates: CandidateSet,
    params: OdefsParams,
    m_star: int,
    m: int,
    size: int,
) -> list[tuple[ComponentResult, FloatArray] | None]:
    semaphore = asyncio.Semaphore(params.workers)

    async def train(index: int) -> tuple[ComponentResult, FloatArray] | None:
        async with semaphore:
            return await asyncio.to_thread(_component, index, data, detector, candidates, params, m_star, m)

    return list(await asyncio.gather(*(train(index) for index in range(size))))


async def run_odefs_async(data: Dataset, params: OdefsParams) -> tuple[FloatArray, EnsembleModel]:
    """
    Run the ensemble with embedded feature selection on a normalized dataset.

    Initial scores come from the bare detector, the candidates from thresholding them. Every component samples a
    batch, learns feature weights, keeps the features above epsilon and scores all objects with them. The final
    score is the loss weighted sum of the sum-normalized component scores.

    Args:
        data (Dataset): The normalized dataset.
        params (OdefsParams): Run parameters.

    Returns:
        tuple[FloatArray, EnsembleModel]: Final scores (summing to 1) and the trained ensemble.

    Raises:
        EmptyCandidatesError: If thresholding selects nothing.
        EnsembleError: If every component is degenerate.
    """
    detector = await asyncio.to_thread(initiate_detector, data, params)
    initial = await asyncio.to_thread(detector.score_rows, np.ones(data.d))
    candidates = select_candidates(initial, params.a)
    if len(candidates) == 0:
        raise EmptyCandidatesError(f"no outlier candidates above mu + {params.a} * sigma, lower a")

    m_star = params.resolve_m_star(data.n)
    m = min(params.unlabeled_ratio * m_star, data.n)
    size = params.ensemble_size(len(candidates), m_star)
    logger.info(f"Training {size} component(s) with m_star={m_star}, m={m} on {len(candidates)} candidates")

    trained = await _train_components(data, detector, candidates, params, m_star, m, size)
    survivors = [item for item in trained if item is not None]
    if not survivors:
        raise EnsembleError(f"all {size} components are degenerate")

    components = [component for component, _ in survivors]
    weights = aggregation_weights(np.array([component.loss for component in components]))
    final_scores = np.zeros(data.n)
    for weight, (_, normalized) in zip(weights, survivors):
        final_scores += weight * normalized

    model = EnsembleModel(
        components=components,
        aggregation_weights=weights,
        candidate_set=candidates,
        m_star=m_star,
        m=m,
        ensemble_size=size,
    )
    return final_scores, model


def run_odefs(data: Dataset, params: OdefsParams) -> tuple[FloatArray, EnsembleModel]:
    """Synchronous form of :func:`run_odefs_async`, usable with or without a running event loop."""
    return run_coroutine(run_odefs_async(data, params))


def run_bare(data: Dataset, params: OdefsParams) -> FloatArray:
    """Score every object with the bare detector (all feature weights 1), as the ensemble's first stage does."""
    return initiate_detector(data, params).score_rows(np.ones(data.d))
