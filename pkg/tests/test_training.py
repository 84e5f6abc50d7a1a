import numpy as np
import pytest

from odefs.data import Dataset, SyntheticSpec, generate_synthetic, minmax_normalize
from odefs.detectors import LesinnDetector
from odefs.errors import OptimizationError
from odefs.thresholding import select_candidates
from odefs.training import (
    RankingObjective,
    TrainingBatch,
    TrainOptions,
    empirical_j_star,
    example_loss,
    init_w0,
    objective_value,
    optimize_w,
    project_weights,
    train_component,
    update_lambda,
    update_v,
)

from .conftest import LinearDetector, make_dataset


def batch(outliers: list[int], unlabeled: list[int]) -> TrainingBatch:
    return TrainingBatch(outlier_examples=np.array(outliers), unlabeled_examples=np.array(unlabeled))


def lesinn_batch(detector: LesinnDetector, m_star: int, m: int, seed: int) -> TrainingBatch:
    rng = np.random.default_rng(seed)
    candidates = select_candidates(detector.score_rows(np.ones(detector.d)), a=1.0)
    return batch(
        rng.choice(candidates.indices, size=m_star).tolist(),
        rng.choice(detector.data.n, size=m, replace=False).tolist(),
    )


@pytest.fixture
def linear() -> LinearDetector:
    # rows: unlabeled reference, score gap ln 3, ln 4 and -ln 4 above it, and a huge gap
    return LinearDetector(make_dataset([[0.0], [np.log(3.0)], [np.log(4.0)], [-np.log(4.0)], [100.0]]))


class TestExampleLoss:
    def test_equal_scores(self) -> None:
        detector = LesinnDetector.build(make_dataset([[0.5, 0.5]] * 6), c=3, subsample_size=2, seed=0)
        assert example_loss(0, np.ones(2), batch([0, 1], [2, 3, 4]), detector) == 0.5

    def test_gap(self, linear: LinearDetector) -> None:
        assert example_loss(0, np.ones(1), batch([1], [0]), linear) == pytest.approx(0.25)

    def test_large_gap(self, linear: LinearDetector) -> None:
        assert example_loss(0, np.ones(1), batch([4], [0]), linear) < 1e-40

    def test_strictly_inside_unit_interval(self, small_detector: LesinnDetector) -> None:
        examples = lesinn_batch(small_detector, 8, 48, seed=1)
        losses = RankingObjective(examples, small_detector).losses(np.ones(small_detector.d))
        assert np.all((losses > 0) & (losses < 1))


class TestObjectiveValue:
    def test_nothing_selected(self, linear: LinearDetector) -> None:
        value = objective_value(np.array([2.0]), np.array([0, 0]), 0.7, 0.1, batch([2, 3], [0]), linear)
        assert value == pytest.approx(0.2)

    def test_everything_selected(self, linear: LinearDetector) -> None:
        value = objective_value(np.ones(1), np.array([1, 1]), 0.0, 0.01, batch([2, 3], [0]), linear)
        assert value == pytest.approx((0.2 + 0.8) / 2 + 0.01)

    def test_partial_selection(self, linear: LinearDetector) -> None:
        value = objective_value(np.ones(1), np.array([1, 0]), 0.5, 0.01, batch([2, 3], [0]), linear)
        assert value == pytest.approx(-0.14)

    def test_rejects_wrong_selection_length(self, linear: LinearDetector) -> None:
        with pytest.raises(ValueError):
            objective_value(np.ones(1), np.array([1]), 0.5, 0.01, batch([2, 3], [0]), linear)


class TestEmpiricalJStar:
    def test_extremes(self, linear: LinearDetector) -> None:
        assert empirical_j_star(np.ones(1), batch([1, 2], [0, 3]), linear) == 1.0
        assert empirical_j_star(np.ones(1), batch([3], [0, 1]), linear) == 0.0

    def test_ties_count(self, linear: LinearDetector) -> None:
        assert empirical_j_star(np.ones(1), batch([1], [1, 2]), linear) == 0.5

    def test_brute_force(self, small_detector: LesinnDetector) -> None:
        examples = lesinn_batch(small_detector, 6, 30, seed=2)
        w = np.linspace(0.2, 1.8, small_detector.d)
        scores = small_detector.score_rows(w)
        expected = np.mean(
            [
                scores[i] >= scores[j]
                for i in examples.outlier_examples.tolist()
                for j in examples.unlabeled_examples.tolist()
            ]
        )
        assert empirical_j_star(w, examples, small_detector) == pytest.approx(expected)


class TestSelfPacedUpdates:
    def test_update_lambda(self) -> None:
        assert update_lambda(None, np.array([0.4, 0.6])) == pytest.approx(0.6)
        assert update_lambda(None, np.array([0.3, 0.3])) == pytest.approx(0.3)
        assert update_lambda(0.9, np.array([0.4, 0.6])) == 0.9

    @pytest.mark.parametrize("value", [0.1, 1 / 3, 0.7])
    def test_identical_losses_select_nothing(self, value: float) -> None:
        losses = np.full(7, value)
        lam = update_lambda(None, losses)
        assert lam == value
        assert update_v(losses, lam).sum() == 0

    def test_update_lambda_rejects_empty(self) -> None:
        with pytest.raises(ValueError):
            update_lambda(None, np.array([]))

    def test_update_v(self) -> None:
        np.testing.assert_array_equal(update_v(np.array([0.1, 0.6]), 0.5), [1, 0])
        np.testing.assert_array_equal(update_v(np.array([0.5, 0.2]), 0.5), [0, 1])

    def test_at_least_half_selected(self) -> None:
        rng = np.random.default_rng(5)
        for _ in range(1000):
            losses = rng.uniform(0.01, 0.99, size=int(rng.integers(2, 65)))
            v = update_v(losses, update_lambda(None, losses))
            assert v.sum() >= np.ceil(len(losses) / 2)


class TestProjectWeights:
    def test_clips_inside_the_budget(self) -> None:
        np.testing.assert_array_equal(project_weights(np.array([0.5, -1.0, 0.2]), 2.0), [0.5, 0.0, 0.2])

    def test_shifts_onto_the_budget(self) -> None:
        np.testing.assert_allclose(project_weights(np.array([2.0, 1.0, 0.0]), 2.0), [1.5, 0.5, 0.0])

    def test_random_points(self) -> None:
        rng = np.random.default_rng(11)
        for _ in range(50):
            radius = rng.uniform(0.5, 5.0)
            projected = project_weights(rng.normal(scale=3.0, size=8), radius)
            assert np.all(projected >= 0)
            assert projected.sum() <= radius * (1 + 1e-12)
            np.testing.assert_allclose(project_weights(projected, radius), projected, atol=1e-12)


class TestOptimizeW:
    def test_nothing_selected_keeps_weights(self, small_detector: LesinnDetector) -> None:
        examples = lesinn_batch(small_detector, 4, 20, seed=3)
        w = np.linspace(0.5, 1.5, small_detector.d)
        result = optimize_w(w, np.zeros(4, dtype=np.int64), 1e-4, examples, small_detector, TrainOptions())
        np.testing.assert_array_equal(result, w)

    def test_descends(self, small_detector: LesinnDetector) -> None:
        examples = lesinn_batch(small_detector, 8, 48, seed=4)
        v = np.ones(8, dtype=np.int64)
        w0 = np.ones(small_detector.d)
        opts = TrainOptions(inner_max_steps=30)

        w = optimize_w(w0, v, 1e-4, examples, small_detector, opts)
        assert np.all(w >= 0)
        before = objective_value(w0, v, 0.0, 1e-4, examples, small_detector)
        assert objective_value(w, v, 0.0, 1e-4, examples, small_detector) <= before

    def test_weight_moves_to_the_separating_feature(self) -> None:
        # the outlier example is ln 3 above the reference in feature 0 and 1 below it in feature 1
        detector = LinearDetector(make_dataset([[0.0, 0.0], [np.log(3.0), -1.0]]))
        w = optimize_w(np.ones(2), np.ones(1, dtype=np.int64), 0.0, batch([1], [0]), detector, TrainOptions())
        assert w.sum() <= 2.0 + 1e-12
        assert w[0] > 1.9
        assert w[1] < 0.1

    def test_weights_stay_within_the_budget(self, linear: LinearDetector) -> None:
        w = optimize_w(np.ones(1), np.ones(1, dtype=np.int64), 0.0, batch([1], [0]), linear, TrainOptions())
        assert w[0] == pytest.approx(1.0)

        w = optimize_w(
            np.ones(1), np.ones(1, dtype=np.int64), 0.0, batch([1], [0]), linear, TrainOptions(l1_radius=10.0)
        )
        assert 1.0 < w[0] <= 10.0 + 1e-12

    def test_init_w0(self, small_detector: LesinnDetector) -> None:
        examples = lesinn_batch(small_detector, 8, 48, seed=4)
        opts = TrainOptions(inner_max_steps=30)
        expected = optimize_w(
            np.ones(small_detector.d), np.ones(8, dtype=np.int64), 1e-4, examples, small_detector, opts
        )
        np.testing.assert_array_equal(init_w0(examples, 1e-4, small_detector, opts), expected)

    def test_non_finite_gradient(self, linear: LinearDetector, monkeypatch: pytest.MonkeyPatch) -> None:
        def broken(self: RankingObjective, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            return np.array([0.5]), np.array([[np.nan]])

        monkeypatch.setattr(RankingObjective, "losses_and_gradients", broken)
        with pytest.raises(OptimizationError):
            optimize_w(np.ones(1), np.ones(1, dtype=np.int64), 0.0, batch([1], [0]), linear, TrainOptions())


def test_smooth_gradient_matches_finite_differences(small_detector: LesinnDetector) -> None:
    examples = lesinn_batch(small_detector, 8, 48, seed=6)
    objective = RankingObjective(examples, small_detector)
    v = np.array([1, 1, 0, 1, 1, 0, 1, 1])
    rng = np.random.default_rng(7)
    h = 1e-6
    checked = 0

    for _ in range(20):
        w = rng.uniform(0.5, 1.5, size=small_detector.d)
        value, gradient = objective.smooth(w, v)
        score_gradients = objective.prepared.scores_and_gradients(w)[1]

        numeric = np.empty(small_detector.d)
        stable = True
        for k in range(small_detector.d):
            step = np.zeros(small_detector.d)
            step[k] = h
            if not all(
                np.array_equal(objective.prepared.scores_and_gradients(w + sign * step)[1], score_gradients)
                for sign in (1, -1)
            ):
                stable = False
                break
            numeric[k] = (objective.smooth(w + step, v)[0] - objective.smooth(w - step, v)[0]) / (2 * h)

        if stable:
            checked += 1
            assert np.linalg.norm(numeric - gradient) <= 1e-4 * np.linalg.norm(gradient)

    assert checked >= 10


class TestTrainComponent:
    @pytest.fixture
    def tiny(self) -> LesinnDetector:
        spec = SyntheticSpec(n=60, d=4, d_relevant=2, outlier_fraction=0.1, seed=1)
        return LesinnDetector.build(minmax_normalize(generate_synthetic(spec))[0], c=5, subsample_size=4, seed=2)

    def test_checkpoints_never_increase(self, tiny: LesinnDetector) -> None:
        opts = TrainOptions(max_outer_iterations=10, inner_max_steps=20)
        for seed in range(100):
            state = train_component(lesinn_batch(tiny, 4, 12, seed), tiny, opts)

            assert all(later <= earlier for earlier, later in zip(state.checkpoints, state.checkpoints[1:]))
            assert min(state.checkpoints) > -2
            lambdas = [row.lam for row in state.trace]
            assert all(later >= earlier for earlier, later in zip(lambdas, lambdas[1:]))
            assert 1 <= state.iteration <= opts.max_outer_iterations
            assert np.all(state.w >= 0)
            assert state.w.sum() <= tiny.d * (1 + 1e-12)
            assert set(np.unique(state.v)) <= {0, 1}
            assert state.final_loss == state.objective_history[-1]

    def test_without_self_paced_selection(self, tiny: LesinnDetector) -> None:
        opts = TrainOptions(max_outer_iterations=5, inner_max_steps=20, self_paced=False)
        state = train_component(lesinn_batch(tiny, 4, 12, 0), tiny, opts)
        np.testing.assert_array_equal(state.v, np.ones(4))
        assert state.lam == 0.0
        assert state.checkpoints == state.objective_history
        assert all(later <= earlier for earlier, later in zip(state.checkpoints, state.checkpoints[1:]))

    def test_relevant_features_gain_weight(self) -> None:
        spec = SyntheticSpec(n=2000, d=100, d_relevant=20, outlier_fraction=0.02, seed=3)
        data: Dataset = minmax_normalize(generate_synthetic(spec))[0]
        detector = LesinnDetector.build(data, c=50, subsample_size=8, seed=0)
        candidates = select_candidates(detector.score_rows(np.ones(data.d)), a=2.0)
        rng = np.random.default_rng(0)
        examples = batch(
            rng.choice(candidates.indices, size=32, replace=len(candidates) < 32).tolist(),
            rng.choice(data.n, size=192, replace=False).tolist(),
        )

        state = train_component(examples, detector, TrainOptions(max_outer_iterations=5, inner_max_steps=40))
        assert state.w[: spec.d_relevant].mean() > state.w[spec.d_relevant :].mean()
