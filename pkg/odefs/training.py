import logging
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import expit

from odefs.data import FloatArray, IntArray
from odefs.detectors import OutlierDetector, check_weights
from odefs.errors import OptimizationError

logger = logging.getLogger(__name__)


class TrainOptions(BaseModel):
    """Options of one component's alternating optimisation.

    Attributes:
        theta (float): L1 coefficient.
        max_outer_iterations (int): Hard cap on lambda / v / w rounds.
        outer_tolerance (float): Relative objective change below which the rounds stop.
        inner_max_steps (int): Hard cap on descent steps per w update.
        inner_initial_step (float): First step size tried by the line search.
        inner_tolerance (float): Relative decrease below which a w update stops.
        max_halvings (int): Step halvings tried before a w update gives up.
        l1_radius (float, optional): Bound on the sum of the weights, the number of features when unset.
        self_paced (bool): Select examples by thresholded self-paced learning. Without it every outlier example is
            always used.
        seed (int): Seed recorded with the component. Full batch descent itself draws nothing.
    """

    theta: float = Field(default=1e-4, ge=0.0)
    max_outer_iterations: int = Field(default=50, ge=1)
    outer_tolerance: float = Field(default=1e-6, gt=0.0)
    inner_max_steps: int = Field(default=200, ge=1)
    inner_initial_step: float = Field(default=0.1, gt=0.0)
    inner_tolerance: float = Field(default=1e-6, gt=0.0)
    max_halvings: int = Field(default=30, ge=0)
    l1_radius: float | None = Field(default=None, gt=0.0)
    self_paced: bool = True
    seed: int = 0


@dataclass(frozen=True)
class TrainingBatch:
    """One component's training examples.

    Attributes:
        outlier_examples (IntArray): m_star object indices drawn from the candidate set.
        unlabeled_examples (IntArray): m object indices drawn from the whole dataset.
    """

    outlier_examples: IntArray
    unlabeled_examples: IntArray

    def __post_init__(self) -> None:
        if len(self.outlier_examples) < 1 or len(self.unlabeled_examples) < 1:
            raise ValueError("a batch needs at least one outlier example and one unlabeled example")

    @property
    def m_star(self) -> int:
        return len(self.outlier_examples)

    @property
    def m(self) -> int:
        return len(self.unlabeled_examples)


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    lam: float
    selected: int
    objective: float


@dataclass
class ComponentState:
    """Learnables of one ensemble component.

    Attributes:
        w (FloatArray): Feature weights.
        v (IntArray): 0/1 weights of the outlier examples.
        lam (float): The age parameter.
        iteration (int): Completed outer iterations.
        objective_history (list[float]): Self-paced objective after every outer iteration.
        checkpoints (list[float]): Self-paced objective after the lambda, v and w update of every iteration.
        trace (list[TraceRow]): Per iteration diagnostics.
        final_loss (float): Self-paced objective at termination.
        converged (bool): Whether the relative change fell below the tolerance.
    """

    w: FloatArray
    v: IntArray
    lam: float
    iteration: int = 0
    objective_history: list[float] = field(default_factory=list)
    checkpoints: list[float] = field(default_factory=list)
    trace: list[TraceRow] = field(default_factory=list)
    final_loss: float = float("nan")
    converged: bool = False


class RankingObjective:
    """
    The logistic pairwise ranking loss of one batch.

    ``L_i = (1/m) sum_j 1 / (1 + exp(s(x*_i) - s(x_j)))`` for every outlier example i. The batch rows are prepared
    once on the detector, every evaluation is then a function of the weights only.
    """

    def __init__(self, batch: TrainingBatch, scorer: OutlierDetector) -> None:
        self.batch = batch
        self.d = scorer.d
        rows = np.concatenate([batch.outlier_examples, batch.unlabeled_examples])
        self.prepared = scorer.prepare(rows)

    def scores(self, w: FloatArray) -> tuple[FloatArray, FloatArray]:
        scores = self.prepared.scores(w)
        return scores[: self.batch.m_star], scores[self.batch.m_star :]

    def losses(self, w: FloatArray) -> FloatArray:
        outlier_scores, unlabeled_scores = self.scores(w)
        gaps = outlier_scores[:, None] - unlabeled_scores[None, :]
        return expit(-gaps).mean(axis=1)  # type: ignore[no-any-return]

    def losses_and_gradients(self, w: FloatArray) -> tuple[FloatArray, FloatArray]:
        """Return every example loss (m_star,) and its gradient with respect to w (m_star x d)."""
        scores, gradients = self.prepared.scores_and_gradients(w)
        m_star = self.batch.m_star
        gaps = scores[:m_star, None] - scores[None, m_star:]
        pair_losses = expit(-gaps)
        slopes = pair_losses * (1.0 - pair_losses)

        outlier_gradients, unlabeled_gradients = gradients[:m_star], gradients[m_star:]
        loss_gradients = -(slopes.sum(axis=1)[:, None] * outlier_gradients - slopes @ unlabeled_gradients)
        return pair_losses.mean(axis=1), loss_gradients / self.batch.m

    def smooth(self, w: FloatArray, v: IntArray) -> tuple[float, FloatArray]:
        """Value and gradient of ``(1/m_star) sum_i v_i L_i`` at w."""
        losses, gradients = self.losses_and_gradients(w)
        m_star = self.batch.m_star
        return float(v @ losses) / m_star, (v @ gradients) / m_star


def self_paced_objective(losses: FloatArray, w: FloatArray, v: IntArray, lam: float, theta: float) -> float:
    return float(np.mean(v * losses - lam * v)) + theta * float(np.abs(w).sum())


def example_loss(i: int, w: FloatArray, batch: TrainingBatch, scorer: OutlierDetector) -> float:
    """Ranking loss of the i-th outlier example, strictly inside (0, 1)."""
    w = check_weights(w, scorer.d)
    return float(RankingObjective(batch, scorer).losses(w)[i])


def objective_value(
    w: FloatArray, v: IntArray, lam: float, theta: float, batch: TrainingBatch, scorer: OutlierDetector
) -> float:
    """
    Self-paced objective ``(1/m_star) sum_i (v_i L_i - lam v_i) + theta ||w||_1``.

    Args:
        w (FloatArray): Non-negative feature weights.
        v (IntArray): 0/1 example weights, one per outlier example.
        lam (float): The age parameter.
        theta (float): L1 coefficient.
        batch (TrainingBatch): The training examples.
        scorer (OutlierDetector): The detector the weights are embedded in.

    Returns:
        float: The objective value.
    """
    w = check_weights(w, scorer.d)
    v = np.asarray(v, dtype=np.int64)
    if v.shape != (batch.m_star,):
        raise ValueError(f"expected {batch.m_star} example weights, got shape {v.shape}")
    return self_paced_objective(RankingObjective(batch, scorer).losses(w), w, v, lam, theta)


def empirical_j_star(w: FloatArray, batch: TrainingBatch, scorer: OutlierDetector) -> float:
    """Fraction of (outlier example, unlabeled example) pairs where the outlier example scores at least as high."""
    w = check_weights(w, scorer.d)
    outlier_scores, unlabeled_scores = RankingObjective(batch, scorer).scores(w)
    return float(np.mean(outlier_scores[:, None] >= unlabeled_scores[None, :]))


def update_lambda(previous: float | None, losses: FloatArray) -> float:
    """
    Threshold the age parameter by the loss statistics: ``max(previous, mean(L) + std(L))``.

    The standard deviation is the population one. The first call (no previous value) returns ``mean + std``.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.size == 0:
        raise ValueError("losses must not be empty")
    # Identical losses (a single repeated candidate) give exactly their value, so the strict v rule selects none
    if np.ptp(losses) == 0:
        statistic = float(losses[0])
    else:
        statistic = float(losses.mean() + losses.std())
    return statistic if previous is None else max(previous, statistic)


def update_v(losses: FloatArray, lam: float) -> IntArray:
    """Select the examples whose loss is strictly below lam."""
    return (np.asarray(losses) < lam).astype(np.int64)


def project_weights(w: FloatArray, radius: float) -> FloatArray:
    """
    Euclidean projection onto ``{w >= 0, sum(w) <= radius}``.

    Clipping at zero is enough when the clipped weights fit the budget. Otherwise the point goes onto the simplex
    of the given radius by subtracting the one shift that makes the positive parts sum to it.
    """
    clipped = np.maximum(np.asarray(w, dtype=np.float64), 0.0)
    if clipped.sum() <= radius:
        return clipped

    ordered = np.sort(clipped)[::-1]
    excess = np.cumsum(ordered) - radius
    count = np.flatnonzero(ordered * np.arange(1, len(ordered) + 1) > excess)[-1] + 1
    return np.maximum(clipped - excess[count - 1] / count, 0.0)


def _descend(
    objective: RankingObjective,
    w: FloatArray,
    v: IntArray,
    theta: float,
    opts: TrainOptions,
    lam: float = 0.0,
) -> tuple[FloatArray, float]:
    """
    Projected gradient descent with backtracking on the w subproblem.

    The L1 term is linear on the non-negative orthant, so it adds theta to the partial derivative of every positive
    weight. Every step is projected onto the non-negative weights whose sum stays within ``opts.l1_radius``. Steps
    are halved until the objective strictly decreases and doubled after every accepted step. The lambda term does
    not depend on w; it is carried so the returned value is the self-paced objective.

    Returns:
        tuple[FloatArray, float]: The final weights and the objective value there.
    """
    losses, gradients = objective.losses_and_gradients(w)
    value = self_paced_objective(losses, w, v, lam, theta)
    if not v.any():
        return w.copy(), value

    m_star = objective.batch.m_star
    radius = opts.l1_radius if opts.l1_radius is not None else float(objective.d)
    step = opts.inner_initial_step
    for _ in range(opts.inner_max_steps):
        direction = (v @ gradients) / m_star + theta * (w > 0)
        if not np.all(np.isfinite(direction)):
            raise OptimizationError("non-finite gradient in the w update")

        for _ in range(opts.max_halvings + 1):
            candidate = project_weights(w - step * direction, radius)
            candidate_losses, candidate_gradients = objective.losses_and_gradients(candidate)
            candidate_value = self_paced_objective(candidate_losses, candidate, v, lam, theta)
            if candidate_value < value:
                break
            step /= 2
        else:
            logger.debug(f"Line search found no descent step at objective {value:.8g}")
            break

        decrease = value - candidate_value
        w, gradients, value = candidate, candidate_gradients, candidate_value
        step *= 2
        if decrease <= opts.inner_tolerance * max(abs(value), 1e-12):
            break

    return w, value


def optimize_w(
    w_init: FloatArray,
    v: IntArray,
    theta: float,
    batch: TrainingBatch,
    scorer: OutlierDetector,
    opts: TrainOptions,
) -> FloatArray:
    """
    Minimise ``(1/m_star) sum_i v_i L_i(w) + theta ||w||_1`` over non-negative w with ``sum(w) <= opts.l1_radius``.

    Args:
        w_init (FloatArray): Starting weights, non-negative.
        v (IntArray): 0/1 example weights. With no example selected w_init is returned unchanged.
        theta (float): L1 coefficient.
        batch (TrainingBatch): The training examples.
        scorer (OutlierDetector): The detector the weights are embedded in.
        opts (TrainOptions): Descent options.

    Returns:
        FloatArray: Non-negative weights within the budget whose objective is not above the one at w_init.

    Raises:
        OptimizationError: If a gradient is not finite.
    """
    w = check_weights(w_init, scorer.d)
    return _descend(RankingObjective(batch, scorer), w, np.asarray(v, dtype=np.int64), theta, opts)[0]


def init_w0(batch: TrainingBatch, theta: float, scorer: OutlierDetector, opts: TrainOptions) -> FloatArray:
    """Initial weights: the w update from all-ones weights with every outlier example selected."""
    return optimize_w(np.ones(scorer.d), np.ones(batch.m_star, dtype=np.int64), theta, batch, scorer, opts)


def train_component(batch: TrainingBatch, scorer: OutlierDetector, opts: TrainOptions) -> ComponentState:
    """
    Alternate lambda, v and w updates until the self-paced objective settles.

    Every update can only lower the objective: a larger lambda lowers the ``-lambda v_i`` terms, the v update picks
    the minimising selection for the current losses and the w update is a descent method. The objective is bounded
    below by ``-lambda > -2``, so the rounds converge.

    Args:
        batch (TrainingBatch): The training examples.
        scorer (OutlierDetector): The detector the weights are embedded in.
        opts (TrainOptions): Optimisation options.

    Returns:
        ComponentState: Final weights, selection, age parameter and the objective history.
    """
    objective = RankingObjective(batch, scorer)
    ones = np.ones(batch.m_star, dtype=np.int64)

    w, _ = _descend(objective, np.ones(scorer.d), ones, opts.theta, opts)
    state = ComponentState(w=w, v=ones, lam=0.0)
    lam: float | None = None
    losses = objective.losses(w)

    previous: float | None = None
    for iteration in range(1, opts.max_outer_iterations + 1):
        if opts.self_paced:
            lam = update_lambda(lam, losses)
            state.checkpoints.append(self_paced_objective(losses, state.w, state.v, lam, opts.theta))
            state.v = update_v(losses, lam)
            state.checkpoints.append(self_paced_objective(losses, state.w, state.v, lam, opts.theta))
        else:
            lam = 0.0

        state.w, value = _descend(objective, state.w, state.v, opts.theta, opts, lam)
        losses = objective.losses(state.w)
        state.checkpoints.append(value)

        state.lam = lam
        state.iteration = iteration
        state.objective_history.append(value)
        state.trace.append(TraceRow(iteration=iteration, lam=lam, selected=int(state.v.sum()), objective=value))
        logger.debug(f"iteration={iteration} lambda={lam:.6g} selected={int(state.v.sum())} objective={value:.8g}")

        if previous is not None and abs(previous - value) <= opts.outer_tolerance * max(abs(previous), 1e-12):
            state.converged = True
            break
        previous = value

    state.final_loss = state.objective_history[-1]
    return state
