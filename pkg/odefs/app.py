import json
import logging
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, ValidationError, model_validator

from odefs.data import SyntheticSpec, generate_synthetic, load_csv, minmax_normalize, write_csv
from odefs.ensemble import OdefsParams, run_bare, run_odefs
from odefs.errors import ConfigError, UsageError
from odefs.experiments import Experiment, initiate_experiments
from odefs.metrics import evaluate
from odefs.reports import plot_sweep, write_json, write_metrics, write_model, write_scores, write_sweep, write_traces

logger = logging.getLogger(__name__)


def merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Recursively merge overrides into a copy of base, nested dicts are merged key by key."""
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def validate(model: type[BaseModel], content: dict[str, Any]) -> Any:
    try:
        return model.model_validate(content)
    except ValidationError as error:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in problem['loc']) or '<root>'}: {problem['msg']}"
            for problem in error.errors()
        )
        raise ConfigError(problems) from error


class OdefsApplication:
    """
    The commands behind the ``odefs`` command line: detect, synth and experiment.

    Every command writes into its output directory and echoes the resolved configuration there as ``config.json``.
    """

    class Arguments(BaseModel):
        """Configuration of a run, loaded from JSON and overridden by command line flags.

        Attributes:
            input (Path, optional): CSV file to score.
            synthetic (SyntheticSpec, optional): Synthetic dataset to generate instead of reading a file.
            label_column (str, optional): Name of the 0/1 label column of the input file.
            output (Path): Output directory, or output file for ``synth``.
            params (OdefsParams): Ensemble parameters.
            experiments (dict[str, dict]): Per experiment settings, validated by the experiment's own Config.
            traces (bool): Write per iteration training traces.
            plots (bool): Render experiment charts as SVG.
            log_level (str): Logging level of the run.
        """

        input: Path | None = None
        synthetic: SyntheticSpec | None = None
        label_column: str | None = None
        output: Path = Path("output")
        params: OdefsParams = Field(default_factory=OdefsParams)
        experiments: dict[str, dict[str, Any]] = Field(default_factory=dict)
        traces: bool = False
        plots: bool = False
        log_level: str = "INFO"

        @model_validator(mode="after")
        def _one_source(self) -> "OdefsApplication.Arguments":
            if self.input is not None and self.synthetic is not None:
                raise ValueError("give either an input file or a synthetic spec, not both")
            return self

    arguments: "OdefsApplication.Arguments"

    def __init__(self, arguments: "OdefsApplication.Arguments") -> None:
        self.arguments = arguments
        self.experiments = initiate_experiments()

    @classmethod
    def from_sources(cls, config_file: Path | None, overrides: dict[str, Any]) -> "OdefsApplication":
        """
        Build the application from an optional JSON config file and flag overrides.

        Raises:
            ConfigError: If the file cannot be read or any value is out of range.
        """
        content: dict[str, Any] = {}
        if config_file is not None:
            try:
                content = json.loads(Path(config_file).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as error:
                raise ConfigError(f"{config_file}: {error}") from error
            if not isinstance(content, dict):
                raise ConfigError(f"{config_file}: expected a JSON object")
        return cls(validate(cls.Arguments, merge(content, overrides)))

    def _output_directory(self) -> Path:
        directory = self.arguments.output
        directory.mkdir(parents=True, exist_ok=True)
        return directory

    def cmd_detect(self) -> int:
        """
        Score the input (file or synthetic) and write scores, model and, with labels, metrics.

        Returns:
            int: Exit status 0.
        """
        arguments = self.arguments
        if arguments.input is not None:
            data = load_csv(arguments.input, arguments.label_column)
        elif arguments.synthetic is not None:
            data = generate_synthetic(arguments.synthetic)
        else:
            raise ConfigError("detect needs an input file or a synthetic spec")

        data, _ = minmax_normalize(data)
        params = arguments.params.model_copy(update={"m_star": arguments.params.resolve_m_star(data.n)})
        scores, model = run_odefs(data, params)

        directory = self._output_directory()
        write_json(
            directory / "config.json",
            arguments.model_copy(update={"params": params}).model_dump(mode="json"),
        )
        write_scores(directory / "scores.csv", scores, data.labels)
        write_model(directory / "model.json", model)
        if arguments.traces:
            write_traces(directory / "traces.csv", model)

        if data.labels is not None and 0 < data.n_outliers < data.n:
            reports = {
                "odefs": evaluate(scores, data.labels),
                "bare": evaluate(run_bare(data, params), data.labels),
            }
            write_metrics(directory / "metrics.csv", reports)
            for mode, report in reports.items():
                print(f"{mode}: auc={report.auc:.4f} p@{report.k}={report.precision_at_k:.4f}")

        print(f"features per component: {model.mean_selected_count:.1f} of {data.d}")
        return 0

    def cmd_synth(self) -> int:
        """Write the synthetic dataset as a labeled CSV file at the output path."""
        spec = self.arguments.synthetic or SyntheticSpec()
        path = self.arguments.output
        path.parent.mkdir(parents=True, exist_ok=True)
        write_csv(generate_synthetic(spec), path)
        logger.info(f"Wrote {path} ({spec.n}x{spec.d}, {spec.n_outliers} outliers, seed={spec.seed})")
        return 0

    def experiment_config(self, name: str, overrides: dict[str, Any] | None = None) -> Experiment.Config:
        if name not in self.experiments:
            raise UsageError(f"unknown experiment {name!r}, choose from {', '.join(self.experiments)}")

        experiment = self.experiments[name]
        base = {"params": self.arguments.params.model_dump()}
        if self.arguments.synthetic is not None:
            base["synthetic"] = self.arguments.synthetic.model_dump()
        section = merge(merge(base, self.arguments.experiments.get(name, {})), overrides or {})
        return validate(experiment.Config, section)  # type: ignore[no-any-return]

    def cmd_experiment(self, name: str, overrides: dict[str, Any] | None = None) -> int:
        """
        Run one experiment and write its per run and summary CSVs, and optionally its chart.

        Args:
            name (str): One of sweep-m, noise or scalability.
            overrides (dict, optional): Flag overrides of the experiment settings (repeats, seed, workers).

        Returns:
            int: Exit status 0.

        Raises:
            UsageError: If the experiment is unknown.
        """
        config = self.experiment_config(name, overrides)
        result = self.experiments[name].run(config)

        directory = self._output_directory()
        write_json(directory / "config.json", {"experiment": name, **config.model_dump(mode="json")})
        write_sweep(directory, result)
        if self.arguments.plots:
            plot_sweep(directory / f"{name}.svg", result)

        print(result.summary_frame().to_string(index=False))
        return 0
