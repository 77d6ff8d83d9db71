import csv
import os
from pathlib import Path

import pytest

from bushfire_opf.cli import build_parser, main

GOLDEN = Path(__file__).parent / "golden"
COMMANDS = ["", "simulate", "estimate", "experiment", "bound"]


def help_text(command: str) -> str:
    parser = build_parser()
    if command:
        parser = parser._subparsers._group_actions[0].choices[command]
    return parser.format_help()


@pytest.fixture(autouse=True)
def fixed_width(monkeypatch):
    monkeypatch.setenv("COLUMNS", "100")


@pytest.mark.parametrize("command", COMMANDS)
def test_help_matches_golden(command):
    name = f"help_{command or 'main'}.txt"
    assert help_text(command) == (GOLDEN / name).read_text()


@pytest.mark.parametrize("command", COMMANDS[1:])
def test_help_lists_every_flag(command):
    text = help_text(command)
    parser = build_parser()._subparsers._group_actions[0].choices[command]
    for action in parser._actions:
        for flag in action.option_strings:
            assert flag in text


def test_help_exits_zero(capsys):
    assert main(["experiment", "--help"]) == 0
    assert "--interval-policy" in capsys.readouterr().out


def test_usage_errors(tmp_path, capsys):
    assert main([]) == 2
    assert main(["simulate"]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert "not found" in capsys.readouterr().err
    assert main(["experiment", "--config", "ieee11.cfg", "--bogus"]) == 2
    assert main(["experiment", "--config", "ieee11.cfg", "--algorithms", "psychic", "--out", str(tmp_path)]) == 2


def test_runtime_failure_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,count,coordinates\n1,1,5000:5000\n")
    code = main(["estimate", "--config", "ieee11.cfg", "--trajectory", str(bad), "--out", str(tmp_path)])
    assert code == 1
    assert capsys.readouterr().err.startswith("bushfire-opf:")


def test_simulate_and_estimate(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", "ieee11.cfg", "--horizon", "60", "--seed", "3", "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out / "trajectory.csv")))
    assert [int(r["t"]) for r in rows] == list(range(1, 61))
    assert main(["estimate", "--config", "ieee11.cfg", "--horizon", "60", "--seed", "3", "--out", str(out),
                 "--trajectory", str(out / "trajectory.csv")]) == 0
    assert (out / "estimates.csv").is_file()
    first = (out / "estimates.csv").read_bytes()
    assert main(["estimate", "--config", "ieee11.cfg", "--horizon", "60", "--seed", "3", "--out", str(out)]) == 0
    assert (out / "estimates.csv").read_bytes() == first


def test_experiment_outputs_are_reproducible(tmp_path):
    args = ["experiment", "--config", "ieee11.cfg", "--seed", "7", "--horizon", "60", "--reps", "2",
            "--sequences", "1", "--threads", "1", "--algorithms", "algorithm1,naive", "--step-log"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("summary.csv", "regret_curve.csv", "steps.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    summary = list(csv.DictReader(open(tmp_path / "a" / "summary.csv")))
    assert [r["algorithm"] for r in summary] == ["algorithm1", "naive"]
    assert (tmp_path / "a" / "runtime.csv").is_file()


def test_bound_prints_constants(capsys):
    assert main(["bound", "--config", "ieee11.cfg", "--nu-plus", "0.01", "--nu-minus", "0.01"]) == 0
    out = capsys.readouterr().out
    for key in ("K_plus", "K_minus", "bound"):
        assert f"{key} = " in out
