import json
import logging
from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from odefs.data import FloatArray, IntArray  # noqa: E402
from odefs.ensemble import EnsembleModel  # noqa: E402
from odefs.experiments import SweepResult  # noqa: E402
from odefs.metrics import MetricReport, rank_scores  # noqa: E402

logger = logging.getLogger(__name__)


def _csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.info(f"Wrote {path}")
    return path


def write_scores(path: Path, scores: FloatArray, labels: IntArray | None = None) -> Path:
    """Write object index, score and rank (1 = most outlying), plus the label when known."""
    frame = pd.DataFrame({"index": range(len(scores)), "score": scores, "rank": rank_scores(scores)})
    if labels is not None:
        frame["label"] = labels
    return _csv(frame, path)


def write_metrics(path: Path, reports: dict[str, MetricReport]) -> Path:
    frame = pd.DataFrame(
        [
            {"mode": mode, "auc": report.auc, "precision_at_k": report.precision_at_k, "k": report.k}
            for mode, report in reports.items()
        ]
    )
    return _csv(frame, path)


def write_json(path: Path, content: dict[str, Any]) -> Path:
    path.write_text(json.dumps(content, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path


def write_model(path: Path, model: EnsembleModel) -> Path:
    return write_json(path, model.summary())


def write_traces(path: Path, model: EnsembleModel) -> Path:
    frame = pd.DataFrame(
        [
            {
                "component": component.index,
                "iteration": row.iteration,
                "lambda": row.lam,
                "selected": row.selected,
                "objective": row.objective,
            }
            for component in model.components
            for row in component.trace
        ]
    )
    return _csv(frame, path)


def write_sweep(directory: Path, result: SweepResult) -> tuple[Path, Path]:
    """Write ``<name>_runs.csv`` with one row per run and ``<name>_summary.csv`` with one row per configuration."""
    runs = _csv(result.runs_frame(), directory / f"{result.experiment}_runs.csv")
    summary = _csv(result.summary_frame(), directory / f"{result.experiment}_summary.csv")
    return runs, summary


def plot_sweep(path: Path, result: SweepResult) -> Path:
    """
    Render a sweep summary as an SVG line chart.

    Scalability sweeps plot the ensemble and bare runtimes against n (smallest d) and against d (smallest n).
    Other sweeps plot the mean AUC, the bare detector's AUC when recorded, and the mean runtime on a second axis.
    """
    summary = result.summary_frame()
    parameter = result.parameter
    figure, axis = plt.subplots(figsize=(6, 4))

    if result.experiment == "scalability":
        by_n = summary[summary["d"] == summary["d"].min()].sort_values("n")
        by_d = summary[summary["n"] == summary["n"].min()].sort_values("d")
        axis.plot(by_n["n"], by_n["mean_seconds"], marker="o", label=f"varying n (d={summary['d'].min()})")
        axis.plot(by_d["d"], by_d["mean_seconds"], marker="s", label=f"varying d (n={summary['n'].min()})")
        if "mean_bare_seconds" in summary:
            axis.plot(by_n["n"], by_n["mean_bare_seconds"], marker="o", linestyle=":", label="bare, varying n")
            axis.plot(by_d["d"], by_d["mean_bare_seconds"], marker="s", linestyle=":", label="bare, varying d")
        axis.set_xlabel("n or d")
        axis.set_ylabel("seconds")
        axis.legend()
    else:
        axis.errorbar(summary[parameter], summary["mean_auc"], yerr=summary["std_auc"], marker="o", label="ODEFS")
        if "mean_bare_auc" in summary:
            axis.errorbar(
                summary[parameter], summary["mean_bare_auc"], yerr=summary["std_bare_auc"], marker="s", label="bare"
            )
        axis.set_xlabel(parameter)
        axis.set_ylabel("AUC")
        axis.legend(loc="lower right")

        seconds_axis = axis.twinx()
        seconds_axis.plot(summary[parameter], summary["mean_seconds"], color="grey", linestyle="--")
        seconds_axis.set_ylabel("seconds")

    axis.set_title(result.experiment)
    figure.tight_layout()
    figure.savefig(path, format="svg", metadata={"Date": None})
    plt.close(figure)
    logger.info(f"Wrote {path}")
    return path
