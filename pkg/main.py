"""
Command-line entry point for tobitsel.

    python main.py fit --input affairs.csv --response affairs
    python main.py select --input affairs.csv --response affairs --criterion bic --criterion bcv
    python main.py simulate --table 1 --n 100 --M 100 --B 50
    python main.py summarize --input affairs.csv --response affairs --bins 20
    python main.py --from-metadata results/table1.meta.json
"""
import argparse
import sys
from typing import Optional, Sequence

from config import __version__, get_config, load_config_file
from errors import TobitSelError
from logging_config import LoggingMixin, get_logger, setup_logging
from services.workflows import RunConfig, WorkflowOutput, load_metadata, run_workflow


def _csv_list(cast):
    def parse(text: str):
        try:
            return tuple(cast(part) for part in text.split(",") if part.strip())
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e)) from e
    return parse


def _add_data_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", help="CSV file with a header row")
    parser.add_argument("--response", help="name of the censored response column")
    parser.add_argument("--exclude", type=_csv_list(str), help="comma-separated columns to ignore")
    parser.add_argument("--encode-binary", action="store_true", default=None,
                        help="encode two-level text columns as 0/1")
    parser.add_argument("--output", help="output file (default: print to stdout)")


def _add_bootstrap_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--criterion", dest="criteria", action="append",
                        help="aic|bic|aicc|hq|eic1..eic5[:np|pb|npp]|bcv|cv632|bqcv|qcv632|all (repeatable)")
    parser.add_argument("--mechanism", help="default mechanism for bare EIC names")
    parser.add_argument("--B", dest="replicates", type=int, help="bootstrap replicates")
    parser.add_argument("--seed", type=int, help="base seed")
    parser.add_argument("--bias-mode", dest="bias_constant_mode", choices=["normalized", "literal"])
    parser.add_argument("--max-redraws", type=int)
    parser.add_argument("--max-k", type=int, help="largest nested family F(k)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tobitsel", description="Tobit model selection by bootstrap criteria")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--from-metadata", help="replay a run from its .meta.json record")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--log-file", help="also log to this file")
    commands = parser.add_subparsers(dest="command")

    fit = commands.add_parser("fit", help="fit the Tobit model with every column")
    _add_data_arguments(fit)

    select = commands.add_parser("select", help="best-subset or nested selection on a dataset")
    _add_data_arguments(select)
    _add_bootstrap_arguments(select)
    select.add_argument("--subsample", type=int, help="seeded subsample size (without replacement)")
    select.add_argument("--mode", choices=["nested", "subset"])
    select.add_argument("--d-range", type=_csv_list(int), help="comma-separated dimensions for subset mode")
    select.add_argument("--workers", type=int, help="threads scoring candidate families")

    simulate = commands.add_parser("simulate", help="Monte Carlo identification table")
    _add_bootstrap_arguments(simulate)
    simulate.add_argument("--table", type=int, choices=[1, 2, 3, 4])
    simulate.add_argument("--n", dest="n_grid", type=_csv_list(int), help="comma-separated sample sizes")
    simulate.add_argument("--M", dest="runs", type=int, help="Monte Carlo runs")
    simulate.add_argument("--workers", type=int, help="worker processes")
    simulate.add_argument("--output", help="output prefix for .tsv, _risk.csv and .meta.json")

    summarize = commands.add_parser("summarize", help="histogram data of the response")
    _add_data_arguments(summarize)
    summarize.add_argument("--bins", type=int)
    return parser


_RUN_FIELDS = (
    "input", "response", "exclude", "encode_binary", "output", "criteria", "mechanism",
    "replicates", "seed", "bias_constant_mode", "max_redraws", "max_k", "subsample",
    "mode", "d_range", "table", "n_grid", "runs", "workers", "bins",
)


class TobitSelectApplication(LoggingMixin):
    """Builds the run configuration from flags (or a metadata record) and runs one command.

    The global configuration must already hold defaults, environment and file values.
    """

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = get_config()
        self.run_config: Optional[RunConfig] = None

    def initialize(self) -> None:
        args = self.args
        if args.from_metadata:
            self.run_config, recorded = load_metadata(args.from_metadata)
            self.config.update_from_dict(recorded)
            self.logger.info(f"Replaying {self.run_config.command} from {args.from_metadata}")
        else:
            overrides = {name: getattr(args, name, None) for name in _RUN_FIELDS}
            self.run_config = RunConfig.from_app_config(args.command, self.config, **overrides)
        self.run_config.validate()

    def run(self) -> WorkflowOutput:
        if self.run_config is None:
            raise RuntimeError("Application not initialized. Call initialize() first.")
        self.logger.info(f"Running {self.run_config.command}")
        output = run_workflow(self.run_config)
        for path in output.files:
            self.logger.info(f"Output: {path}")
        return output


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command and not args.from_metadata:
        parser.print_help(sys.stderr)
        return 2

    config = get_config()
    try:
        if args.config:
            load_config_file(args.config, config)
    except TobitSelError as e:
        setup_logging(level=config.logging.level)
        get_logger(__name__).error(f"{e}")
        return 1
    setup_logging(
        level=args.log_level or config.logging.level,
        log_to_file=bool(args.log_file) or config.logging.log_to_file,
        log_file_path=args.log_file or config.logging.log_file_path,
        console_format='%(asctime)s - %(levelname)s - %(message)s',
    )
    logger = get_logger(__name__)

    try:
        app = TobitSelectApplication(args)
        app.initialize()
        output = app.run()
        if not app.run_config.output:
            sys.stdout.write(output.text)
        return 0
    except TobitSelError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1
    except KeyboardInterrupt:
        logger.info("Interrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())
