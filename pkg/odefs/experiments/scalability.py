from pydantic import Field, field_validator

from .base import Experiment, Job


class ScalabilityExperiment(Experiment):
    """
    Wall-clock time against data size and feature size.

    Runs are timed one at a time so the timings are not distorted by concurrent runs. The bare detector is timed on
    the same data next to every run. The swept value is n * d.
    """

    name = "scalability"
    description = "Time the ensemble while doubling n at d = 100 and doubling d at n = 1000."
    parameter = "cells"

    class Config(Experiment.Config):
        sizes: list[tuple[int, int]] = Field(
            default_factory=lambda: [
                (1000, 100),
                (2000, 100),
                (4000, 100),
                (8000, 100),
                (1000, 200),
                (1000, 400),
                (1000, 800),
            ],
            min_length=1,
        )
        repeats: int = Field(default=3, ge=1)

        @field_validator("sizes")
        @classmethod
        def _check_sizes(cls, sizes: list[tuple[int, int]]) -> list[tuple[int, int]]:
            if not all(n >= 2 and d >= 1 for n, d in sizes):
                raise ValueError("every size needs n >= 2 and d >= 1")
            return sizes

    def workers(self, config: Experiment.Config) -> int:
        return 1

    def jobs(self, config: Experiment.Config) -> list[Job]:
        assert isinstance(config, ScalabilityExperiment.Config)
        relevant_share = config.synthetic.d_relevant / config.synthetic.d
        return [
            self._job(
                config,
                value=n * d,
                row=row,
                repeat=repeat,
                spec_update={"n": n, "d": d, "d_relevant": max(1, round(relevant_share * d))},
                with_bare=True,
            )
            for row, (n, d) in enumerate(sorted(config.sizes, key=lambda size: (size[0] * size[1], size)))
            for repeat in range(config.repeats)
        ]
