import logging
import sys
from argparse import ArgumentParser, Namespace
from pathlib import Path
from typing import Any, Sequence

from odefs.app import OdefsApplication
from odefs.errors import OdefsError, OutputError, UsageError


def _params_overrides(args: Namespace) -> dict[str, Any]:
    params: dict[str, Any] = {}
    for flag, key in (
        ("seed", "seed"),
        ("a", "a"),
        ("m_star", "m_star"),
        ("unlabeled_ratio", "unlabeled_ratio"),
        ("epsilon", "epsilon"),
        ("workers", "workers"),
    ):
        if getattr(args, flag, None) is not None:
            params[key] = getattr(args, flag)
    if getattr(args, "no_self_paced", False):
        params["train_options"] = {"self_paced": False}
    return params


def _synthetic_overrides(args: Namespace) -> dict[str, Any]:
    synthetic: dict[str, Any] = {}
    for key in ("n", "d", "d_relevant", "outlier_fraction"):
        if getattr(args, key, None) is not None:
            synthetic[key] = getattr(args, key)
    if args.command == "synth" and args.seed is not None:
        synthetic["seed"] = args.seed
    return synthetic


def overrides_from(args: Namespace) -> dict[str, Any]:
    """Translate the parsed flags into overrides of the JSON configuration."""
    overrides: dict[str, Any] = {}
    if args.log_level is not None:
        overrides["log_level"] = args.log_level
    if getattr(args, "output", None) is not None:
        overrides["output"] = args.output

    if args.command == "detect":
        if args.input is not None:
            overrides["input"] = args.input
        if args.label_column is not None:
            overrides["label_column"] = args.label_column
        if args.traces:
            overrides["traces"] = True
        if args.synthetic:
            overrides["synthetic"] = {}
        if params := _params_overrides(args):
            overrides["params"] = params
    elif args.command == "synth":
        overrides["synthetic"] = _synthetic_overrides(args)
    elif args.command == "experiment" and args.plots:
        overrides["plots"] = True
    return overrides


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="odefs", description="Outlier detection ensemble with embedded feature selection")
    parser.add_argument("--config", type=Path, help="JSON configuration file")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.set_defaults(command=None)
    subparsers = parser.add_subparsers()

    detect_parser = subparsers.add_parser("detect", help="score a CSV file or a synthetic dataset")
    detect_parser.set_defaults(command="detect")
    source = detect_parser.add_mutually_exclusive_group()
    source.add_argument("--input", type=Path, help="CSV file with a header row")
    source.add_argument("--synthetic", action="store_true", help="score the synthetic benchmark from the config")
    detect_parser.add_argument("--label-column")
    detect_parser.add_argument("--output", type=Path, help="output directory")
    detect_parser.add_argument("--seed", type=int)
    detect_parser.add_argument("--a", type=float, help="thresholding rate")
    detect_parser.add_argument("--m-star", type=int)
    detect_parser.add_argument("--unlabeled-ratio", type=int)
    detect_parser.add_argument("--epsilon", type=float)
    detect_parser.add_argument("--workers", type=int)
    detect_parser.add_argument("--no-self-paced", action="store_true")
    detect_parser.add_argument("--traces", action="store_true", help="write per iteration training traces")

    synth_parser = subparsers.add_parser("synth", help="write the synthetic benchmark as CSV")
    synth_parser.set_defaults(command="synth")
    synth_parser.add_argument("--output", type=Path, required=True, help="CSV file to write")
    synth_parser.add_argument("--n", type=int)
    synth_parser.add_argument("--d", type=int)
    synth_parser.add_argument("--d-relevant", type=int)
    synth_parser.add_argument("--outlier-fraction", type=float)
    synth_parser.add_argument("--seed", type=int)

    experiment_parser = subparsers.add_parser("experiment", help="run sweep-m, noise or scalability")
    experiment_parser.set_defaults(command="experiment")
    experiment_parser.add_argument("name")
    experiment_parser.add_argument("--output", type=Path, help="output directory")
    experiment_parser.add_argument("--repeats", type=int)
    experiment_parser.add_argument("--seed", type=int)
    experiment_parser.add_argument("--workers", type=int)
    experiment_parser.add_argument("--plots", action="store_true", help="render the summary as SVG")

    return parser


def run(args: Namespace) -> int:
    if args.command is None:
        raise UsageError("choose a command: detect, synth or experiment")

    application = OdefsApplication.from_sources(args.config, overrides_from(args))
    logging.basicConfig(
        level=application.arguments.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )

    match args.command:
        case "detect":
            return application.cmd_detect()
        case "synth":
            return application.cmd_synth()
        case _:
            experiment_overrides = {
                key: getattr(args, key) for key in ("repeats", "seed", "workers") if getattr(args, key) is not None
            }
            return application.cmd_experiment(args.name, experiment_overrides)


def _report(error: OdefsError) -> int:
    message = " ".join(str(error).split())
    print(f"error: {error.code}: {message}", file=sys.stderr)
    return 2 if isinstance(error, UsageError) else 1


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except OdefsError as error:
        return _report(error)
    except OSError as error:
        return _report(OutputError(error))


if __name__ == "__main__":
    sys.exit(main())
