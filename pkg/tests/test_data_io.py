"""
Tests for CSV ingestion and table emission.
"""
import math

import numpy as np
import pandas as pd
import pytest

from config import get_config
from errors import DataError, MissingColumn, MissingValues, NegativeResponse, NonNumericColumn
from models.tobit import CensoredDataset
from services.data_io import (
    AFFAIRS_VARIABLES,
    INTERCEPT_NAME,
    config_line,
    emit_histogram,
    format_number,
    identification_frame,
    ingest_csv,
    make_affairs_like,
    render_table,
    risk_frame,
    write_text,
)
from services.simulation import CriterionCounts, IdentificationTable


def write_csv(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestIngestCsv:
    def test_small_file(self, tmp_path):
        data = ingest_csv(write_csv(tmp_path, "y,x1\n0,1\n2,0\n1,1\n"), "y")
        assert (data.n, data.u, data.q) == (3, 2, 2)
        assert data.column_names == ("x1", INTERCEPT_NAME)
        assert data.intercept_column == 1
        np.testing.assert_array_equal(data.design[:, 1], 1.0)

    def test_negative_response_row(self, tmp_path):
        with pytest.raises(NegativeResponse) as excinfo:
            ingest_csv(write_csv(tmp_path, "y,x1\n0,1\n-1,0\n1,1\n"), "y")
        assert excinfo.value.row == 1
        assert excinfo.value.value == -1.0

    def test_missing_column(self, tmp_path):
        with pytest.raises(MissingColumn) as excinfo:
            ingest_csv(write_csv(tmp_path, "y,x1\n0,1\n"), "z", exclude=["w"])
        assert excinfo.value.columns == ["z", "w"]

    def test_categorical_columns_listed(self, tmp_path):
        path = write_csv(tmp_path, "y,g,h,x\n0,a,u,1\n1,b,v,2\n2,c,w,3\n")
        with pytest.raises(NonNumericColumn) as excinfo:
            ingest_csv(path, "y")
        assert excinfo.value.columns == ["g", "h"]

    def test_missing_values_rows(self, tmp_path):
        with pytest.raises(MissingValues) as excinfo:
            ingest_csv(write_csv(tmp_path, "y,x1\n0,1\n2,\n1,1\n,3\n"), "y")
        assert excinfo.value.rows == [1, 3]

    def test_exclude(self, tmp_path):
        data = ingest_csv(write_csv(tmp_path, "y,id,x1\n0,a,1\n2,b,0\n"), "y", exclude=["id"])
        assert data.column_names == ("x1", INTERCEPT_NAME)

    def test_encode_binary(self, tmp_path):
        path = write_csv(tmp_path, "y,gender,x\n0,male,1\n2,female,0\n1,male,1\n")
        with pytest.raises(NonNumericColumn):
            ingest_csv(path, "y")
        data = ingest_csv(path, "y", encode_binary=True)
        np.testing.assert_array_equal(data.design[:, 0], [1.0, 0.0, 1.0])

    def test_reserved_intercept_name(self, tmp_path):
        with pytest.raises(DataError):
            ingest_csv(write_csv(tmp_path, "y,const\n0,1\n1,1\n"), "y")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            ingest_csv(str(tmp_path / "nope.csv"), "y")

    def test_lossless_numeric_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        values = np.abs(rng.standard_normal((25, 3))) * 10.0 ** rng.integers(-8, 8, size=(25, 3))
        text = "y,a,b\n" + "".join(",".join(repr(float(v)) for v in row) + "\n" for row in values)
        data = ingest_csv(write_csv(tmp_path, text), "y")
        np.testing.assert_array_equal(data.responses, values[:, 0])
        np.testing.assert_array_equal(data.design[:, :2], values[:, 1:])

    def test_affairs_shaped_file(self, affairs_csv):
        data = ingest_csv(affairs_csv, "affairs", encode_binary=True)
        assert data.n == 200
        assert data.column_names[:-1] == AFFAIRS_VARIABLES
        assert len(data.explanatory_columns) == 8


class TestAffairsLike:
    def test_shape_and_censoring(self):
        frame = make_affairs_like()
        assert frame.shape == (601, 9)
        assert list(frame.columns) == ["affairs", *AFFAIRS_VARIABLES]
        assert (frame["affairs"] == 0).mean() == pytest.approx(0.75, abs=0.06)

    def test_seeded(self):
        pd.testing.assert_frame_equal(make_affairs_like(50, seed=4), make_affairs_like(50, seed=4))


class TestFormatting:
    def test_numbers(self):
        assert format_number(1.0 / 3.0) == "0.333333"
        assert format_number(1449.123456) == "1449.12"
        assert format_number(2.0e-9) == "2e-09"
        assert format_number(np.int64(56)) == "56"
        assert format_number(True) == "true"
        assert format_number(math.nan) == "nan"
        assert format_number(-math.inf) == "-inf"
        assert format_number("EIC1_np") == "EIC1_np"

    def test_significant_digits_configurable(self):
        get_config().output.significant_digits = 3
        assert format_number(3.14159) == "3.14"

    def test_config_line_is_sorted_json(self):
        assert config_line({"b": 1, "a": [1, 2]}) == '# config: {"a":[1,2],"b":1}\n'

    def test_render_table(self):
        frame = pd.DataFrame({"criterion": ["AIC", "BIC"], "value": [210.0, 223.02585]})
        text = render_table(frame, {"seed": 1})
        assert text.splitlines() == [
            '# config: {"seed":1}',
            "criterion\tvalue",
            "AIC\t210",
            "BIC\t223.026",
        ]


class TestHistogram:
    def test_counts(self):
        data = CensoredDataset([0.0, 0.0, 0.0, 3.0], np.ones((4, 1)))
        assert emit_histogram(data, 2).splitlines() == ["left,right,count", "0,1.5,3", "1.5,3,1"]

    def test_counts_sum_to_n(self, sample_data):
        text = emit_histogram(sample_data, 7)
        counts = [int(line.split(",")[2]) for line in text.splitlines()[1:]]
        assert len(counts) == 7
        assert sum(counts) == sample_data.n

    def test_bins_positive(self, sample_data):
        with pytest.raises(ValueError):
            emit_histogram(sample_data, 0)


class TestFrames:
    def test_identification_layout(self):
        tables = [
            IdentificationTable(100, 4, 2, {"BIC": CriterionCounts(1, 1, 0)}),
            IdentificationTable(120, 4, 2, {"BIC": CriterionCounts(0, 2, 0)}),
        ]
        frame = identification_frame(tables)
        assert list(frame.columns) == [
            "criterion",
            "n100_under", "n100_correct", "n100_over",
            "n120_under", "n120_correct", "n120_over",
        ]
        assert frame.iloc[0].tolist() == ["BIC", 1, 1, 0, 0, 2, 0]

    def test_risk_frame(self):
        frame = risk_frame({"BIC": [(100, 0.5), (120, 1.0)]})
        assert frame.values.tolist() == [[100, "BIC", 0.5], [120, "BIC", 1.0]]


def test_write_text_uses_lf(tmp_path):
    path = write_text(str(tmp_path / "out" / "table.tsv"), "a\tb\n1\t2\n")
    with open(path, "rb") as handle:
        assert handle.read() == b"a\tb\n1\t2\n"
