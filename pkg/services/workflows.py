"""
Batch workflows behind the command line: fit, select, simulate, summarize.

Each workflow returns the report text and the files it wrote. Runs that write
files also write ``<output>.meta.json``, from which the run can be replayed
byte for byte.
"""
import dataclasses
import json
import logging
import os
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config import AppConfig, __version__, get_config
from errors import ConfigError, ContractViolation
from logging_config import log_performance
from models.tobit import CensoredDataset, fit_mle
from services import data_io
from services.bootstrap import BootstrapSpec, Mechanism
from services.criteria import TABLE_CRITERIA, BiasConstantMode, CandidateScorer, CriterionId, aic, bic
from services.rng import derive_seed, substream
from services.selection import best_subset, nested_scan
from services.simulation import TABLE_PRESETS, SimulationConfig, monte_carlo, preset_config, risk_curve


logger = logging.getLogger(__name__)

COMMANDS = ("fit", "select", "simulate", "summarize")
SCAN_MODES = ("nested", "subset")

# Seed channels of a select run.
SUBSAMPLE = 0
BOOTSTRAP = 1


@dataclass
class RunConfig:
    """Everything a command needs; recorded verbatim in the run metadata."""
    command: str
    input: Optional[str] = None
    response: Optional[str] = None
    exclude: Tuple[str, ...] = ()
    encode_binary: bool = False
    criteria: Tuple[str, ...] = ()
    mechanism: str = "nonparametric"
    replicates: int = 200
    max_redraws: int = 100
    seed: int = 20190601
    bias_constant_mode: str = "normalized"
    output: Optional[str] = None
    subsample: Optional[int] = None
    mode: str = "subset"
    d_range: Optional[Tuple[int, ...]] = None
    max_k: Optional[int] = None
    table: int = 1
    n_grid: Tuple[int, ...] = (100, 120, 150, 200)
    runs: int = 500
    workers: int = 1
    bins: int = 20

    def __post_init__(self):
        self.exclude = tuple(self.exclude)
        self.criteria = tuple(self.criteria)
        self.n_grid = tuple(int(n) for n in self.n_grid)
        if self.d_range is not None:
            self.d_range = tuple(int(d) for d in self.d_range)

    @classmethod
    def from_app_config(cls, command: str, config: Optional[AppConfig] = None, **overrides) -> "RunConfig":
        """Defaults from the application config, then explicit overrides (None means unset)."""
        config = config or get_config()
        values: Dict[str, Any] = dict(
            mechanism=config.bootstrap.mechanism,
            replicates=config.bootstrap.replicates,
            max_redraws=config.bootstrap.max_redraws,
            seed=config.bootstrap.base_seed,
            bias_constant_mode=config.bootstrap.bias_constant_mode,
            n_grid=config.simulation.n_grid,
            runs=config.simulation.runs,
            workers=config.simulation.workers,
        )
        if command == "simulate":
            values["replicates"] = config.simulation.replicates
            values["seed"] = config.simulation.seed
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(command=command, **values)

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"Unknown run settings: {', '.join(sorted(unknown))}")
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"Unknown command {self.command!r}")
        if self.command in ("fit", "select", "summarize") and not (self.input and self.response):
            raise ConfigError(f"{self.command} needs --input and --response")
        if self.mode not in SCAN_MODES:
            raise ConfigError(f"mode must be one of {SCAN_MODES}, got {self.mode!r}")
        if self.replicates < 1 or self.runs < 1 or self.workers < 1:
            raise ConfigError("replicates, runs and workers must be >= 1")
        if self.subsample is not None and self.subsample < 2:
            raise ConfigError(f"subsample must be >= 2, got {self.subsample}")
        if self.table not in TABLE_PRESETS:
            raise ConfigError(f"table must be one of {sorted(TABLE_PRESETS)}, got {self.table}")
        if self.bins < 1:
            raise ConfigError(f"bins must be >= 1, got {self.bins}")
        try:
            Mechanism.parse(self.mechanism)
            BiasConstantMode(self.bias_constant_mode)
            self.criterion_ids()
        except (ContractViolation, ValueError) as e:
            raise ConfigError(str(e)) from e

    def criterion_ids(self) -> Tuple[CriterionId, ...]:
        """Parsed criteria; bare EIC names take the run's mechanism, ``all`` means the 23 table rows."""
        names = self.criteria or (("all",) if self.command == "simulate" else ("bic",))
        ids: List[CriterionId] = []
        for name in names:
            if name.lower() == "all":
                ids.extend(TABLE_CRITERIA)
            elif name.lower().startswith("eic") and not any(sep in name for sep in ":_"):
                ids.append(CriterionId.parse(f"{name}:{Mechanism.parse(self.mechanism).tag}"))
            else:
                ids.append(CriterionId.parse(name))
        return tuple(dict.fromkeys(ids))

    def bootstrap_spec(self, base_seed: int) -> BootstrapSpec:
        return BootstrapSpec(
            mechanism=Mechanism.parse(self.mechanism),
            replicates=self.replicates,
            max_redraws=self.max_redraws,
            base_seed=base_seed,
        )


@dataclass
class WorkflowOutput:
    text: str
    files: List[str] = field(default_factory=list)


def metadata_record(run: RunConfig, config: Optional[AppConfig] = None) -> Dict[str, Any]:
    config = config or get_config()
    return {"tool": "tobitsel", "version": __version__, "run": run.to_dict(), "config": config.to_dict()}


def metadata_path(output: str) -> str:
    return output + ".meta.json"


def write_metadata(output: str, record: Dict[str, Any]) -> str:
    text = json.dumps(record, sort_keys=True, indent=2) + "\n"
    return data_io.write_text(metadata_path(output), text)


def load_metadata(path: str) -> Tuple[RunConfig, Dict[str, Any]]:
    """Run settings and configuration recorded by a previous run."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            record = json.load(handle)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read metadata {path}: {e}") from e
    if not isinstance(record, dict) or "run" not in record or "config" not in record:
        raise ConfigError(f"{path} is not a tobitsel metadata file")
    return RunConfig.from_dict(record["run"]), record["config"]


def _finish(run: RunConfig, text: str, record: Dict[str, Any]) -> WorkflowOutput:
    if not run.output:
        return WorkflowOutput(text)
    files = [data_io.write_text(run.output, text), write_metadata(run.output, record)]
    return WorkflowOutput(text, files)


def _load(run: RunConfig) -> CensoredDataset:
    return data_io.ingest_csv(run.input, run.response, run.exclude, run.encode_binary)


def subsample_rows(data: CensoredDataset, size: int, seed: int) -> CensoredDataset:
    """Seeded subsample without replacement, original row order kept."""
    if size > data.n:
        raise ConfigError(f"subsample size {size} exceeds n={data.n}")
    rows = np.sort(substream(seed, SUBSAMPLE).choice(data.n, size=size, replace=False))
    return data.take(rows)


def run_fit(run: RunConfig) -> WorkflowOutput:
    run.validate()
    data = _load(run)
    fit = fit_mle(data)
    if not fit.converged:
        logger.warning(f"MLE did not converge: gradient norm {fit.gradient_norm:.3e}")
    record = metadata_record(run)
    frame = data_io.fit_report_frame(data, fit, aic(fit), bic(fit, data.n))
    return _finish(run, data_io.render_table(frame, record), record)


@log_performance("Model selection")
def run_select(run: RunConfig) -> WorkflowOutput:
    """Best-subset minima per d (or the nested scan) for each requested criterion."""
    run.validate()
    data = _load(run)
    if run.subsample is not None:
        data = subsample_rows(data, run.subsample, run.seed)
        logger.info(f"Subsampled {data.n} rows (u={data.u})")

    spec = run.bootstrap_spec(derive_seed(run.seed, BOOTSTRAP))
    mode = BiasConstantMode(run.bias_constant_mode)
    scorer = CandidateScorer(data, spec, mode)
    if run.workers > 1:
        with ThreadPoolExecutor(max_workers=run.workers) as executor:
            rows = _select_rows(run, data, spec, scorer, executor)
    else:
        rows = _select_rows(run, data, spec, scorer, None)

    logger.debug(f"Cache: {scorer.cache.get_cache_stats()}")
    record = metadata_record(run)
    return _finish(run, data_io.render_table(pd.DataFrame(rows), record), record)


def _select_rows(run: RunConfig, data: CensoredDataset, spec: BootstrapSpec, scorer: CandidateScorer,
                 executor: Optional[Executor]) -> List[Dict[str, Any]]:
    rows: List[Dict[str, Any]] = []
    for criterion in run.criterion_ids():
        if run.mode == "subset":
            result = best_subset(data, criterion, spec, run.d_range, scorer=scorer, executor=executor)
            for d, minimum in result.minima.items():
                rows.append({
                    "criterion": criterion.label,
                    "d": d,
                    "k": minimum.family.k,
                    "value": minimum.score.value,
                    "bias_se": minimum.score.bias_se if minimum.score.bias_se is not None else float("nan"),
                    "candidates": minimum.candidates,
                    "variables": "+".join(minimum.family.variable_names(data)) or "-",
                    "selected": d == result.best.d,
                })
            logger.info(f"{criterion.label}: d_hat={result.best.d} "
                        f"({'+'.join(result.best.family.variable_names(data)) or 'intercept only'})")
        else:
            max_k = run.max_k or len(data.explanatory_columns) + 2
            result = nested_scan(data, criterion, max_k, spec, scorer=scorer, executor=executor)
            for family, score in result.scores.items():
                rows.append({
                    "criterion": criterion.label,
                    "d": family.d,
                    "k": family.k,
                    "value": score.value,
                    "bias_se": score.bias_se if score.bias_se is not None else float("nan"),
                    "candidates": 1,
                    "variables": "+".join(family.variable_names(data)) or "-",
                    "selected": family == result.chosen,
                })
            logger.info(f"{criterion.label}: chose {result.chosen.label}, d_hat={result.d_hat}")
    return rows


@log_performance("Simulation")
def run_simulate(run: RunConfig) -> WorkflowOutput:
    """Identification table over the n grid, risk curves and metadata."""
    run.validate()
    criteria = run.criterion_ids()
    tables = []
    for n in run.n_grid:
        config: SimulationConfig = preset_config(
            run.table,
            n,
            runs=run.runs,
            replicates=run.replicates,
            criteria=criteria,
            seed=run.seed,
            max_k=run.max_k,
            max_redraws=run.max_redraws,
            bias_constant_mode=run.bias_constant_mode,
            workers=run.workers,
        )
        table = monte_carlo(config)
        if table.failed_runs:
            logger.warning(f"n={n}: {table.failed_runs} failed runs")
        tables.append(table)

    record = metadata_record(run)
    table_text = data_io.render_table(data_io.identification_frame(tables), record)
    risk_text = data_io.render_table(data_io.risk_frame(risk_curve(tables)), record, sep=",")
    prefix = run.output or os.path.join(get_config().output.output_dir, f"table{run.table}")
    files = [
        data_io.write_text(prefix + ".tsv", table_text),
        data_io.write_text(prefix + "_risk.csv", risk_text),
        write_metadata(prefix, record),
    ]
    return WorkflowOutput(table_text, files)


def run_summarize(run: RunConfig) -> WorkflowOutput:
    run.validate()
    data = _load(run)
    record = metadata_record(run)
    return _finish(run, data_io.emit_histogram(data, run.bins, record), record)


WORKFLOWS = {
    "fit": run_fit,
    "select": run_select,
    "simulate": run_simulate,
    "summarize": run_summarize,
}


def run_workflow(run: RunConfig) -> WorkflowOutput:
    return WORKFLOWS[run.command](run)
