from .base import Experiment, Job, RunRecord, SweepResult, doubling_ratios, execute_job, linear_fit_r2
from .noise import NoiseExperiment
from .scalability import ScalabilityExperiment
from .unlabeled_ratio import UnlabeledRatioExperiment

__all__ = [
    "Experiment",
    "Job",
    "NoiseExperiment",
    "RunRecord",
    "ScalabilityExperiment",
    "SweepResult",
    "UnlabeledRatioExperiment",
    "doubling_ratios",
    "execute_job",
    "initiate_experiments",
    "linear_fit_r2",
]


def initiate_experiments() -> dict[str, Experiment]:
    experiments: list[Experiment] = [UnlabeledRatioExperiment(), NoiseExperiment(), ScalabilityExperiment()]
    return {experiment.name: experiment for experiment in experiments}
