import asyncio
import math

import numpy as np
import pytest

from odefs.data import Dataset, SyntheticSpec, generate_synthetic, minmax_normalize
from odefs.detectors import LesinnDetector, initiate_detector
from odefs.ensemble import (
    OdefsParams,
    aggregation_weights,
    normalize_scores,
    run_bare,
    run_odefs,
    run_odefs_async,
    sample_batch,
    select_features,
)
from odefs.errors import DegenerateComponentError, EmptyCandidatesError
from odefs.thresholding import CandidateSet, select_candidates
from odefs.training import TrainOptions

from .conftest import make_dataset

FAST_TRAINING = TrainOptions(max_outer_iterations=5, inner_max_steps=20)


def candidate_set(indices: list[int], n: int) -> CandidateSet:
    return CandidateSet(indices=np.array(indices, dtype=np.int64), mu=0.0, sigma=1.0, a=2.0, n=n)


@pytest.fixture
def params() -> OdefsParams:
    return OdefsParams(train_options=FAST_TRAINING, lesinn=LesinnDetector.Config(c=20, subsample_size=8), seed=4)


@pytest.fixture
def synthetic() -> Dataset:
    spec = SyntheticSpec(n=600, d=20, d_relevant=5, outlier_fraction=0.05, seed=13)
    return minmax_normalize(generate_synthetic(spec))[0]


class TestSampleBatch:
    @pytest.fixture
    def data(self) -> Dataset:
        return make_dataset(np.zeros((10000, 1)).tolist())

    def test_exactly_enough_candidates(self, data: Dataset) -> None:
        candidates = candidate_set(list(range(0, 64, 2)), data.n)
        examples = sample_batch(data, candidates, m_star=32, m=192, seed=1)
        assert sorted(examples.outlier_examples.tolist()) == candidates.indices.tolist()
        assert len(set(examples.unlabeled_examples.tolist())) == 192

    def test_few_candidates_are_repeated(self, data: Dataset) -> None:
        candidates = candidate_set([3, 70, 900], data.n)
        examples = sample_batch(data, candidates, m_star=32, m=192, seed=1)
        assert examples.m_star == 32
        assert set(examples.outlier_examples.tolist()) <= {3, 70, 900}

    def test_seeds(self, data: Dataset) -> None:
        candidates = candidate_set(list(range(0, 10000, 2)), data.n)
        first = sample_batch(data, candidates, m_star=32, m=192, seed=1)
        again = sample_batch(data, candidates, m_star=32, m=192, seed=1)
        other = sample_batch(data, candidates, m_star=32, m=192, seed=2)
        np.testing.assert_array_equal(first.outlier_examples, again.outlier_examples)
        np.testing.assert_array_equal(first.unlabeled_examples, again.unlabeled_examples)
        assert not np.array_equal(first.unlabeled_examples, other.unlabeled_examples)

    def test_unlabeled_capped_at_n(self) -> None:
        data = make_dataset([[0.0], [1.0], [2.0]])
        examples = sample_batch(data, candidate_set([2], data.n), m_star=2, m=12, seed=0)
        assert sorted(examples.unlabeled_examples.tolist()) == [0, 1, 2]

    def test_no_candidates(self, data: Dataset) -> None:
        with pytest.raises(EmptyCandidatesError):
            sample_batch(data, candidate_set([], data.n), m_star=32, m=192, seed=1)


class TestSelectFeatures:
    def test_relative_threshold(self) -> None:
        np.testing.assert_array_equal(select_features(np.array([1.0, 0.04, 0.5]), 0.05), [0, 2])

    def test_threshold_is_strict(self) -> None:
        np.testing.assert_array_equal(select_features(np.array([1.0, 0.25, 0.5]), 0.25), [0, 2])

    def test_argmax_always_selected(self) -> None:
        rng = np.random.default_rng(0)
        for _ in range(100):
            w = rng.exponential(size=20) * (rng.uniform(size=20) < 0.5)
            if w.max() > 0:
                assert int(np.argmax(w)) in select_features(w, 0.05)

    def test_all_zero(self) -> None:
        with pytest.raises(DegenerateComponentError):
            select_features(np.zeros(3))


class TestNormalizeScores:
    def test_sum_normalization(self) -> None:
        np.testing.assert_allclose(normalize_scores(np.array([1.0, 3.0])), [0.25, 0.75])

    def test_all_zero(self) -> None:
        with pytest.raises(DegenerateComponentError):
            normalize_scores(np.zeros(4))

    def test_negative(self) -> None:
        with pytest.raises(ValueError):
            normalize_scores(np.array([1.0, -1.0]))


class TestAggregationWeights:
    def test_equal_losses(self) -> None:
        np.testing.assert_allclose(aggregation_weights(np.array([0.3, 0.3])), [0.5, 0.5])

    def test_lower_loss_weighs_more(self) -> None:
        np.testing.assert_allclose(aggregation_weights(np.array([0.0, math.log(3.0)])), [0.75, 0.25])

    def test_negative_losses(self) -> None:
        weights = aggregation_weights(np.array([-1.2, -0.4, 0.3]))
        assert weights.sum() == pytest.approx(1.0)
        assert weights[0] > weights[1] > weights[2]


class TestOdefsParams:
    def test_m_star_by_size(self) -> None:
        params = OdefsParams()
        assert params.resolve_m_star(10000) == 32
        assert params.resolve_m_star(10001) == 64
        assert OdefsParams(m_star=5).resolve_m_star(10**6) == 5

    def test_ensemble_size(self) -> None:
        assert OdefsParams().ensemble_size(n_star=33, m_star=32) == 4
        assert OdefsParams().ensemble_size(n_star=1, m_star=32) == 2
        assert OdefsParams(ensemble_size_override=3).ensemble_size(n_star=100, m_star=32) == 3


class TestRunOdefs:
    def test_scores_and_model(self, synthetic: Dataset, params: OdefsParams) -> None:
        scores, model = run_odefs(synthetic, params)

        assert scores.shape == (synthetic.n,)
        assert np.all(scores >= 0)
        assert scores.sum() == pytest.approx(1.0)
        assert model.m_star == 32 and model.m == 192
        assert model.ensemble_size == 2 * math.ceil(len(model.candidate_set) / 32)
        assert model.aggregation_weights.sum() == pytest.approx(1.0)
        for component in model.components:
            assert component.feature_set
            assert int(np.argmax(component.w)) in component.feature_set
            assert component.w.sum() <= synthetic.d * (1 + 1e-12)

    def test_deterministic(self, synthetic: Dataset, params: OdefsParams) -> None:
        first, _ = run_odefs(synthetic, params)
        second, _ = run_odefs(synthetic, params)
        np.testing.assert_array_equal(first, second)

    def test_async_form(self, synthetic: Dataset, params: OdefsParams) -> None:
        expected, _ = run_odefs(synthetic, params)
        scores, _ = asyncio.run(run_odefs_async(synthetic, params))
        np.testing.assert_array_equal(scores, expected)

    def test_inside_a_running_event_loop(self, synthetic: Dataset, params: OdefsParams) -> None:
        expected, _ = run_odefs(synthetic, params)

        async def caller() -> np.ndarray:
            scores, _ = run_odefs(synthetic, params.model_copy(update={"workers": 2}))
            return scores

        np.testing.assert_array_equal(asyncio.run(caller()), expected)

    def test_worker_count_does_not_change_scores(self, synthetic: Dataset, params: OdefsParams) -> None:
        serial, _ = run_odefs(synthetic, params)
        parallel, _ = run_odefs(synthetic, params.model_copy(update={"workers": 3}))
        np.testing.assert_array_equal(serial, parallel)

    def test_candidates_come_from_bare_scores(self, synthetic: Dataset, params: OdefsParams) -> None:
        _, model = run_odefs(synthetic, params)
        expected = select_candidates(run_bare(synthetic, params), params.a)
        np.testing.assert_array_equal(model.candidate_set.indices, expected.indices)

    def test_single_component_scores_its_subset(self, synthetic: Dataset, params: OdefsParams) -> None:
        params = params.model_copy(update={"ensemble_size_override": 1})
        scores, model = run_odefs(synthetic, params)
        (component,) = model.components

        detector = initiate_detector(synthetic, params)
        expected = normalize_scores(detector.score_rows_subset(component.feature_set))
        np.testing.assert_allclose(scores, expected, rtol=1e-12)

    def test_without_self_paced_selection(self, synthetic: Dataset, params: OdefsParams) -> None:
        options = FAST_TRAINING.model_copy(update={"self_paced": False})
        _, model = run_odefs(synthetic, params.model_copy(update={"train_options": options}))
        assert all(component.lam == 0.0 for component in model.components)

    def test_summary(self, synthetic: Dataset, params: OdefsParams) -> None:
        _, model = run_odefs(synthetic, params)
        summary = model.summary()
        assert summary["candidates"]["n_star"] == len(model.candidate_set)
        assert len(summary["components"]) == len(model.components)
        assert summary["mean_selected_count"] == model.mean_selected_count

    def test_identical_rows_have_no_candidates(self, params: OdefsParams) -> None:
        data = make_dataset([[0.5, 0.5]] * 20)
        np.testing.assert_array_equal(run_bare(data, params), np.zeros(20))
        with pytest.raises(EmptyCandidatesError):
            run_odefs(data, params)
