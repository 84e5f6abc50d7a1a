from pydantic import Field

from .base import Experiment, Job


class UnlabeledRatioExperiment(Experiment):
    """
    AUC and runtime against the number of unlabeled examples per outlier example.

    The outlier examples per component stay fixed while m grows in steps of m_star. Beyond a ratio of about six the
    AUC should stay flat while the runtime keeps growing linearly.
    """

    name = "sweep-m"
    description = "Sweep the unlabeled ratio m / m_star at a fixed m_star on the noisy Gaussian benchmark."
    parameter = "unlabeled_ratio"

    class Config(Experiment.Config):
        m_star: int = Field(default=32, ge=1)
        ratios: list[int] = Field(default_factory=lambda: list(range(1, 13)), min_length=1)

    def jobs(self, config: Experiment.Config) -> list[Job]:
        assert isinstance(config, UnlabeledRatioExperiment.Config)
        return [
            self._job(
                config,
                value=ratio,
                row=row,
                repeat=repeat,
                params_update={"m_star": config.m_star, "unlabeled_ratio": ratio},
            )
            for row, ratio in enumerate(sorted(config.ratios))
            for repeat in range(config.repeats)
        ]
