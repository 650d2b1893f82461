import json
from pathlib import Path

import pytest

from app.core.exceptions import EXIT_CONFIG, EXIT_OK
from app.main import run_command
from app.schemas.trace import ExecutionTrace

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def reports(captured):
    return [json.loads(line) for line in captured.out.splitlines() if line.startswith("{")]


def test_unanimous_config_passes(capsys):
    assert run_command(["--config", str(CONFIGS / "unanimous.yaml"), "--check"]) == EXIT_OK
    (report,) = reports(capsys.readouterr())
    assert report["n"] == 7
    assert all(verdict["passed"] for verdict in report["verdicts"] if verdict["enforced"])


def test_resilience_violation_is_a_config_error(capsys):
    assert run_command(["--config", str(CONFIGS / "bad.yaml")]) == EXIT_CONFIG
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["exit_code"] == EXIT_CONFIG


def test_missing_config():
    assert run_command(["--config", "/nonexistent/run.yaml"]) == EXIT_CONFIG


def test_unknown_adversary():
    assert run_command(["--config", str(CONFIGS / "unanimous.yaml"), "--adversary", "gremlin"]) == EXIT_CONFIG


def test_emit_and_replay(tmp_path, capsys):
    trace_path = tmp_path / "trace.jsonl"
    args = ["--config", str(CONFIGS / "single_fault.yaml"), "--emit-trace", str(trace_path), "--check"]
    assert run_command(args) == EXIT_OK
    first = reports(capsys.readouterr())
    assert ExecutionTrace.read(trace_path).header.n == 7

    assert run_command(["--replay", str(trace_path), "--check"]) == EXIT_OK
    again = reports(capsys.readouterr())
    assert again == first


def test_several_seeds_write_one_trace_each(tmp_path, capsys):
    trace_path = tmp_path / "run.jsonl"
    args = ["--config", str(CONFIGS / "single_fault.yaml"), "--runs", "3", "--emit-trace", str(trace_path)]
    assert run_command(args) == EXIT_OK
    assert [report["seed"] for report in reports(capsys.readouterr())] == [1, 2, 3]
    assert sorted(path.name for path in tmp_path.iterdir()) == ["run-1.jsonl", "run-2.jsonl", "run-3.jsonl"]


def test_table_output(capsys):
    assert run_command(["--config", str(CONFIGS / "unanimous.yaml"), "--table"]) == EXIT_OK
    assert "seed" in capsys.readouterr().out


@pytest.mark.slow
def test_random_config(capsys):
    assert run_command(["--config", str(CONFIGS / "random_n10.yaml"), "--runs", "5", "--check"]) == EXIT_OK
