"""
Tests for the command-line entry point.
"""
import json

import pytest

from config import __version__
from main import build_parser, main


def test_no_command_prints_help(capsys):
    assert main([]) == 2
    assert "usage:" in capsys.readouterr().err


def test_version(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_parser_lists():
    args = build_parser().parse_args(
        ["simulate", "--n", "100,200", "--M", "5", "--B", "3", "--criterion", "bic", "--criterion", "bcv"])
    assert args.n_grid == (100, 200)
    assert (args.runs, args.replicates) == (5, 3)
    assert args.criteria == ["bic", "bcv"]


def test_fit_report_on_stdout(affairs_csv, capsys):
    code = main(["fit", "--input", affairs_csv, "--response", "affairs", "--encode-binary"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.splitlines()[1] == "quantity\tvalue"


def test_summarize_with_config_file(affairs_csv, tmp_path, capsys):
    config_file = tmp_path / "settings.json"
    config_file.write_text(json.dumps({"output": {"significant_digits": 3}}))
    code = main(["--config", str(config_file), "summarize", "--input", affairs_csv, "--encode-binary",
                 "--response", "affairs", "--bins", "4"])
    out = capsys.readouterr().out
    assert code == 0
    assert '"significant_digits":3' in out.splitlines()[0]
    assert len(out.splitlines()) == 6


def test_select_replay_from_metadata(affairs_csv, tmp_path):
    output = tmp_path / "select.tsv"
    argv = ["select", "--input", affairs_csv, "--response", "affairs", "--encode-binary",
            "--criterion", "aic", "--d-range", "0,1", "--output", str(output)]
    assert main(argv) == 0
    first = output.read_bytes()
    output.unlink()
    assert main(["--from-metadata", str(output) + ".meta.json"]) == 0
    assert output.read_bytes() == first


def test_missing_input_is_an_error():
    assert main(["fit", "--response", "y"]) == 1


def test_negative_response_is_an_error(tmp_path):
    path = tmp_path / "neg.csv"
    path.write_text("y,x\n1,0\n-2,1\n")
    assert main(["fit", "--input", str(path), "--response", "y"]) == 1


def test_unknown_criterion_is_an_error(affairs_csv):
    argv = ["select", "--input", affairs_csv, "--response", "affairs", "--criterion", "wic"]
    assert main(argv) == 1


def test_bad_config_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"nonsense": {}}))
    assert main(["--config", str(path), "fit", "--input", "x.csv", "--response", "y"]) == 1
