import asyncio
import logging
from abc import ABCMeta, abstractmethod
from dataclasses import asdict, dataclass, field
from time import perf_counter

import numpy as np
import numpy.typing as npt
import pandas as pd
from aiostream import pipe, stream
from pydantic import BaseModel, Field
from scipy.stats import linregress

from odefs.data import SyntheticSpec, generate_synthetic, minmax_normalize, relevant_features
from odefs.ensemble import OdefsParams, run_bare, run_odefs
from odefs.metrics import MetricReport, evaluate
from odefs.utils import derive_seed, run_coroutine

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Job:
    """One repeat of one sweep configuration.

    Attributes:
        value (float): The swept parameter value.
        row (int): Index of the configuration in the sweep.
        repeat (int): Index of the repeat.
        spec (SyntheticSpec): The data to generate, seeded from the seed ladder.
        params (OdefsParams): The ensemble parameters, seeded from the seed ladder.
        with_bare (bool): Also evaluate the bare detector on the same data.
    """

    value: float
    row: int
    repeat: int
    spec: SyntheticSpec
    params: OdefsParams
    with_bare: bool = False


@dataclass(frozen=True)
class RunRecord:
    value: float
    repeat: int
    seed: int
    n: int
    d: int
    d_relevant: int
    auc: float
    precision_at_k: float
    seconds: float
    mean_selected: float
    relevant_precision: float
    min_relevant_precision: float
    bare_auc: float | None = None
    bare_precision_at_k: float | None = None
    bare_seconds: float | None = None


def linear_fit_r2(x: npt.ArrayLike, y: npt.ArrayLike) -> float:
    """R^2 of the least squares line through (x, y), NaN with fewer than two distinct x."""
    x = np.asarray(x, dtype=np.float64)
    if len(np.unique(x)) < 2:
        return float("nan")
    return float(linregress(x, np.asarray(y, dtype=np.float64)).rvalue ** 2)


def doubling_ratios(summary: pd.DataFrame) -> tuple[list[float], list[float]]:
    """
    Runtime of every (n, d) row divided by the runtime of the row with half its n, resp. half its d.

    Rows without such a partner, and summaries where (n, d) does not identify a row, get NaN.
    """
    sizes = [(int(n), int(d)) for n, d in zip(summary["n"], summary["d"])]
    if len(set(sizes)) != len(sizes):
        return [float("nan")] * len(sizes), [float("nan")] * len(sizes)

    seconds = dict(zip(sizes, summary["mean_seconds"].astype(float)))

    def ratio(size: tuple[int, int], half: tuple[int, int]) -> float:
        if half not in seconds or 2 * half[0] * half[1] != size[0] * size[1]:
            return float("nan")
        return seconds[size] / seconds[half]

    by_n = [ratio((n, d), (n // 2, d)) for n, d in sizes]
    by_d = [ratio((n, d), (n, d // 2)) for n, d in sizes]
    return by_n, by_d


@dataclass
class SweepResult:
    """Per run records of a sweep and their per configuration aggregates.

    Attributes:
        experiment (str): Name of the experiment.
        parameter (str): Name of the swept parameter.
        runs (list[RunRecord]): One record per configuration and repeat, in sweep order.
    """

    experiment: str
    parameter: str
    runs: list[RunRecord] = field(default_factory=list)

    def runs_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([asdict(run) for run in self.runs])
        return frame.rename(columns={"value": self.parameter})

    def summary_frame(self) -> pd.DataFrame:
        """
        Aggregate the runs per configuration, sorted by swept value.

        Besides the means and standard deviations of the metrics, every row carries the runtime growth checks:
        ``runtime_r2`` is the R^2 of a line fitted to the per run seconds over the swept value (the same for
        every row), ``n_doubling_ratio`` and ``d_doubling_ratio`` compare the mean runtime with the configuration
        of half the objects, resp. half the features.
        """
        frame = pd.DataFrame([asdict(run) for run in self.runs])
        aggregations = {
            "repeats": ("repeat", "count"),
            "mean_auc": ("auc", "mean"),
            "std_auc": ("auc", lambda values: float(np.std(values))),
            "mean_precision_at_k": ("precision_at_k", "mean"),
            "mean_seconds": ("seconds", "mean"),
            "mean_selected": ("mean_selected", "mean"),
            "mean_relevant_precision": ("relevant_precision", "mean"),
            "mean_min_relevant_precision": ("min_relevant_precision", "mean"),
        }
        if frame["bare_auc"].notna().any():
            aggregations["mean_bare_auc"] = ("bare_auc", "mean")
            aggregations["std_bare_auc"] = ("bare_auc", lambda values: float(np.std(values)))
            aggregations["mean_bare_precision_at_k"] = ("bare_precision_at_k", "mean")
            aggregations["mean_bare_seconds"] = ("bare_seconds", "mean")

        summary = frame.groupby(["value", "n", "d"], sort=True).agg(**aggregations).reset_index()
        summary["runtime_r2"] = linear_fit_r2(frame["value"], frame["seconds"])
        summary["n_doubling_ratio"], summary["d_doubling_ratio"] = doubling_ratios(summary)
        return summary.rename(columns={"value": self.parameter})


def execute_job(job: Job) -> RunRecord:
    """Generate the job's data, time one ensemble run on it and evaluate the scores."""
    data, _ = minmax_normalize(generate_synthetic(job.spec))
    assert data.labels is not None

    started = perf_counter()
    scores, model = run_odefs(data, job.params)
    seconds = perf_counter() - started

    report = evaluate(scores, data.labels)
    relevant = set(relevant_features(job.spec))
    precisions = [
        float(np.mean([feature in relevant for feature in component.feature_set])) for component in model.components
    ]

    bare: MetricReport | None = None
    bare_seconds: float | None = None
    if job.with_bare:
        started = perf_counter()
        bare_scores = run_bare(data, job.params)
        bare_seconds = perf_counter() - started
        bare = evaluate(bare_scores, data.labels)

    logger.info(
        f"value={job.value:g} repeat={job.repeat}: auc={report.auc:.4f}"
        + (f" bare_auc={bare.auc:.4f}" if bare else "")
        + f" features={model.mean_selected_count:.1f} seconds={seconds:.2f}"
    )
    return RunRecord(
        value=job.value,
        repeat=job.repeat,
        seed=job.spec.seed,
        n=job.spec.n,
        d=job.spec.d,
        d_relevant=job.spec.d_relevant,
        auc=report.auc,
        precision_at_k=report.precision_at_k,
        seconds=seconds,
        mean_selected=model.mean_selected_count,
        relevant_precision=float(np.mean(precisions)),
        min_relevant_precision=min(precisions),
        bare_auc=bare.auc if bare else None,
        bare_precision_at_k=bare.precision_at_k if bare else None,
        bare_seconds=bare_seconds,
    )


class Experiment(metaclass=ABCMeta):
    """
    Abstract base class for the synthetic experiment drivers.

    Attributes:
        name (str): Command line name of the experiment.
        description (str): A brief description of the experiment.
        parameter (str): Name of the swept parameter.
    """

    name: str
    description: str
    parameter: str

    class Config(BaseModel):
        """Settings shared by every experiment.

        Attributes:
            synthetic (SyntheticSpec): The base synthetic dataset, its seed is replaced by the seed ladder.
            params (OdefsParams): The base ensemble parameters.
            repeats (int): Repeats per configuration.
            seed (int): Root of the seed ladder, every run draws from ``(seed, row, repeat)``.
            workers (int): Runs executed concurrently.
        """

        synthetic: SyntheticSpec = Field(default_factory=SyntheticSpec)
        params: OdefsParams = Field(default_factory=OdefsParams)
        repeats: int = Field(default=20, ge=1)
        seed: int = 0
        workers: int = Field(default=1, ge=1)

    def __init__(self) -> None:
        if not all(hasattr(self, attr) for attr in ("name", "description", "parameter")):
            raise NotImplementedError("All required attributes must be provided by the subclass.")

    @abstractmethod
    def jobs(self, config: "Experiment.Config") -> list[Job]:
        """List every (configuration, repeat) job of the sweep in row-major order."""
        ...

    def workers(self, config: "Experiment.Config") -> int:
        return config.workers

    def _job(
        self,
        config: "Experiment.Config",
        value: float,
        row: int,
        repeat: int,
        spec_update: dict[str, object] | None = None,
        params_update: dict[str, object] | None = None,
        with_bare: bool = False,
    ) -> Job:
        spec = SyntheticSpec.model_validate(
            {**config.synthetic.model_dump(), **(spec_update or {}), "seed": derive_seed(config.seed, row, repeat)}
        )
        params = config.params.model_copy(
            update={**(params_update or {}), "seed": derive_seed(config.seed, row, repeat, "run"), "workers": 1}
        )
        return Job(value=value, row=row, repeat=repeat, spec=spec, params=params, with_bare=with_bare)

    def run(self, config: "Experiment.Config") -> SweepResult:
        """
        Execute every job and collect the records in sweep order.

        Args:
            config (Experiment.Config): The experiment settings.

        Returns:
            SweepResult: The per run records.
        """
        jobs = self.jobs(config)
        logger.info(f"Running {self.name}: {len(jobs)} run(s) on {self.workers(config)} worker(s)")
        records = run_coroutine(self._execute(jobs, self.workers(config)))
        return SweepResult(experiment=self.name, parameter=self.parameter, runs=records)

    @staticmethod
    async def _execute(jobs: list[Job], workers: int) -> list[RunRecord]:
        async def execute(job: Job) -> RunRecord:
            return await asyncio.to_thread(execute_job, job)

        records = stream.iterate(jobs) | pipe.map(execute, ordered=True, task_limit=workers)
        return await stream.list(records)  # type: ignore[no-any-return]
