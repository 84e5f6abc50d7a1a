from pydantic import Field, field_validator

from .base import Experiment, Job


class NoiseExperiment(Experiment):
    """
    Noise resilience: AUC of the ensemble and of the bare detector against the share of relevant features.

    Both are evaluated on the same generated datasets, so every row pairs the two.
    """

    name = "noise"
    description = "Vary the fraction of relevant features and compare the ensemble with the bare detector."
    parameter = "relevant_fraction"

    class Config(Experiment.Config):
        relevant_fractions: list[float] = Field(
            default_factory=lambda: [0.05, 0.10, 0.20, 0.35, 0.50, 1.00], min_length=1
        )

        @field_validator("relevant_fractions")
        @classmethod
        def _check_fractions(cls, fractions: list[float]) -> list[float]:
            if not all(0 < fraction <= 1 for fraction in fractions):
                raise ValueError("relevant fractions must lie in (0, 1]")
            return fractions

    def jobs(self, config: Experiment.Config) -> list[Job]:
        assert isinstance(config, NoiseExperiment.Config)
        d = config.synthetic.d
        return [
            self._job(
                config,
                value=fraction,
                row=row,
                repeat=repeat,
                spec_update={"d_relevant": max(1, round(fraction * d))},
                with_bare=True,
            )
            for row, fraction in enumerate(sorted(config.relevant_fractions))
            for repeat in range(config.repeats)
        ]
