"""
Dataset ingestion and report/table emission.

Every emitted file starts with a ``# config:`` line holding the effective
configuration as JSON, uses LF line endings and 6 significant digits.
"""
import json
import logging
import math
import os
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pandas.api.types import is_numeric_dtype

from config import get_config
from errors import (
    ContractViolation,
    DataError,
    MissingColumn,
    MissingValues,
    NegativeResponse,
    NonNumericColumn,
)
from models.tobit import CensoredDataset, TobitFit
from services.rng import standard_normal, substream


logger = logging.getLogger(__name__)

INTERCEPT_NAME = "const"

AFFAIRS_VARIABLES = (
    "gender", "age", "yearsmarried", "children",
    "religiousness", "education", "occupation", "rating",
)


def ingest_csv(
    path: str,
    response_column: str,
    exclude: Iterable[str] = (),
    encode_binary: bool = False,
) -> CensoredDataset:
    """Read a headed CSV into a dataset; every other numeric column becomes a regressor.

    The intercept column is appended last. With ``encode_binary`` two-level
    text columns become 0/1 dummies (first level in sorted order is 0).

    Raises:
        MissingColumn, NonNumericColumn, MissingValues, NegativeResponse.
    """
    if not os.path.exists(path):
        raise DataError(f"Input file not found: {path}")
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise DataError(f"Cannot parse {path}: {e}") from e

    exclude = list(exclude)
    missing = [c for c in [response_column, *exclude] if c not in frame.columns]
    if missing:
        raise MissingColumn(missing)
    if response_column in exclude:
        raise DataError(f"Response column {response_column} cannot be excluded")
    frame = frame.drop(columns=exclude)
    if INTERCEPT_NAME in frame.columns:
        raise DataError(f"Column name {INTERCEPT_NAME!r} is reserved for the intercept")

    if encode_binary:
        frame = encode_binary_columns(frame)
    non_numeric = [c for c in frame.columns if not is_numeric_dtype(frame[c])]
    if non_numeric:
        raise NonNumericColumn(non_numeric)

    incomplete = np.flatnonzero(frame.isna().any(axis=1).to_numpy())
    if incomplete.size:
        raise MissingValues(incomplete.tolist())

    y = frame[response_column].to_numpy(dtype=float)
    negative = np.flatnonzero(y < 0)
    if negative.size:
        raise NegativeResponse(int(negative[0]), float(y[negative[0]]))

    explanatory = [c for c in frame.columns if c != response_column]
    design = np.column_stack([frame[explanatory].to_numpy(dtype=float), np.ones(len(frame))])
    data = CensoredDataset(
        responses=y,
        design=design,
        column_names=tuple(explanatory) + (INTERCEPT_NAME,),
        intercept_column=len(explanatory),
    )
    logger.info(f"Loaded {path}: n={data.n}, u={data.u}, {len(explanatory)} explanatory columns")
    return data


def encode_binary_columns(frame: pd.DataFrame) -> pd.DataFrame:
    frame = frame.copy()
    for column in frame.columns:
        if is_numeric_dtype(frame[column]):
            continue
        levels = sorted(frame[column].dropna().unique().tolist())
        if len(levels) == 2:
            frame[column] = frame[column].map({levels[0]: 0, levels[1]: 1})
            logger.info(f"Encoded {column}: {levels[0]}=0, {levels[1]}=1")
    return frame


def format_number(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(float(value), f".{get_config().output.significant_digits}g")
    return str(value)


def config_line(record: Mapping[str, Any]) -> str:
    return "# config: " + json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n"


def render_table(frame: pd.DataFrame, record: Optional[Mapping[str, Any]] = None, sep: str = "\t") -> str:
    """Delimited text of ``frame`` with every cell formatted by format_number."""
    lines = [] if record is None else [config_line(record)]
    lines.append(sep.join(str(c) for c in frame.columns) + "\n")
    for row in frame.itertuples(index=False):
        lines.append(sep.join(format_number(v) for v in row) + "\n")
    return "".join(lines)


def write_text(path: str, text: str) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    logger.info(f"Wrote {path}")
    return path


def histogram_frame(data: CensoredDataset, bins: int) -> pd.DataFrame:
    if bins < 1:
        raise ContractViolation(f"bins must be >= 1, got {bins}")
    counts, edges = np.histogram(data.responses, bins=bins)
    return pd.DataFrame({"left": edges[:-1], "right": edges[1:], "count": counts})


def emit_histogram(data: CensoredDataset, bins: int, record: Optional[Mapping[str, Any]] = None) -> str:
    """Bin edges and counts of the response as CSV."""
    return render_table(histogram_frame(data, bins), record, sep=",")


def fit_report_frame(data: CensoredDataset, fit: TobitFit, aic: float, bic: float) -> pd.DataFrame:
    rows: List[Tuple[str, Any]] = [(f"beta[{name}]", b) for name, b in zip(data.column_names, fit.beta)]
    rows += [
        ("sigma", fit.sigma),
        ("loglik", fit.loglik),
        ("k", fit.k),
        ("n", data.n),
        ("u", data.u),
        ("censoring_rate", data.censoring_rate),
        ("AIC", aic),
        ("BIC", bic),
        ("converged", fit.converged),
        ("iterations", fit.iterations),
        ("gradient_norm", fit.gradient_norm),
    ]
    return pd.DataFrame(rows, columns=["quantity", "value"])


def identification_frame(tables: Sequence) -> pd.DataFrame:
    """One row per criterion; under/correct/over columns per sample size."""
    if not tables:
        return pd.DataFrame(columns=["criterion"])
    records: Dict[str, Dict[str, Any]] = {label: {"criterion": label} for label in tables[0].counts}
    for table in tables:
        for label, counts in table.counts.items():
            records[label][f"n{table.n}_under"] = counts.under
            records[label][f"n{table.n}_correct"] = counts.correct
            records[label][f"n{table.n}_over"] = counts.over
    return pd.DataFrame(list(records.values()))


def risk_frame(curves: Mapping[str, Sequence[Tuple[int, float]]]) -> pd.DataFrame:
    rows = [(n, label, risk) for label, series in curves.items() for n, risk in series]
    return pd.DataFrame(rows, columns=["n", "criterion", "risk"])


def make_affairs_like(n: int = 601, seed: int = 0) -> pd.DataFrame:
    """Synthetic data shaped like the extramarital-affairs survey (about 75% zeros).

    ``gender`` and ``children`` are text columns; the response is ``affairs``.
    """
    if n < 1:
        raise ContractViolation(f"n must be >= 1, got {n}")
    rng = substream(seed, 0)
    frame = pd.DataFrame({
        "gender": rng.choice(["female", "male"], size=n),
        "age": rng.choice([17.5, 22.0, 27.0, 32.0, 37.0, 42.0, 47.0, 52.0, 57.0], size=n),
        "yearsmarried": rng.choice([0.125, 0.417, 0.75, 1.5, 4.0, 7.0, 10.0, 15.0], size=n),
        "children": rng.choice(["no", "yes"], size=n, p=[0.28, 0.72]),
        "religiousness": rng.integers(1, 6, size=n),
        "education": rng.choice([9, 12, 14, 16, 17, 18, 20], size=n),
        "occupation": rng.integers(1, 8, size=n),
        "rating": rng.integers(1, 6, size=n),
    })
    latent = (
        8.17
        - 0.179 * frame["age"].to_numpy()
        + 0.554 * frame["yearsmarried"].to_numpy()
        - 1.686 * frame["religiousness"].to_numpy()
        + 0.326 * frame["occupation"].to_numpy()
        - 2.285 * frame["rating"].to_numpy()
        + 8.25 * standard_normal(substream(seed, 1), n)
    )
    frame.insert(0, "affairs", np.round(np.where(latent > 0.0, latent, 0.0), 3))
    return frame
