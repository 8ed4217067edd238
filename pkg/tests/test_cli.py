import json

import pandas as pd
import pytest

from src.cli.commands import EXIT_CONFIG, EXIT_OK, EXIT_UNEXPECTED, main
from src.cli.sweep import CSV_COLUMNS
from src.model.throughput import evaluate
from src.model.types import AccessPolicy, Constraints, SystemParams
from src.oracle.network import TRACE_COLUMNS


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "sweep.toml"
    path.write_text(
        '# two-point sweep\nlambda_grid = [0.1, 0.3]\nmodes = ["conventional"]\nn_starts = 4\n',
        encoding="utf-8",
    )
    return path


def test_eval_prints_report(capsys):
    assert main(["eval", "--a1", "0.8", "--a2", "0.3"]) == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    policy = AccessPolicy(a1=0.8, a2=0.3, gamma1=2e-10, gamma2=1e-10)
    expected = evaluate(policy, SystemParams(), 0.3, Constraints())
    assert printed["mu_s"] == pytest.approx(expected.mu_s)
    assert printed["feasible"] is True


def test_eval_lambda_override(capsys):
    assert main(["eval", "--lambda-p", "0.95", "--a1", "0", "--a2", "0"]) == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed["stable"] is False
    assert printed["feasible"] is False


def test_invalid_policy_is_a_config_error(capsys):
    assert main(["eval", "--a1", "0.2", "--a2", "0.5"]) == EXIT_CONFIG
    assert "a2 must not exceed a1" in capsys.readouterr().err


def test_invalid_document_is_a_config_error(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text("sense_tau = 2e-3\n", encoding="utf-8")
    assert main(["eval", "--config", str(path)]) == EXIT_CONFIG
    assert "sense_tau" in capsys.readouterr().err


def test_missing_document_is_a_config_error(tmp_path):
    assert main(["sweep", "--config", str(tmp_path / "absent.toml")]) == EXIT_CONFIG


def test_bad_override_is_a_config_error(small_config):
    assert main(["sweep", "--config", str(small_config), "--starts", "0"]) == EXIT_CONFIG


def test_sweep_to_stdout(small_config, capsys):
    assert main(["sweep", "--config", str(small_config)]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 3


def test_sweep_is_byte_identical(small_config, tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--config", str(small_config), "--out", str(first)]) == EXIT_OK
    assert main(["sweep", "--config", str(small_config), "--out", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()


def test_simulate_is_byte_identical(capsys):
    args = ["simulate", "--slots", "20000", "--seed", "5"]
    assert main(args) == EXIT_OK
    first = capsys.readouterr().out
    assert main(args) == EXIT_OK
    assert capsys.readouterr().out == first
    assert json.loads(first)["slots_counted"] == 18_000


def test_simulate_writes_trace(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    assert main(["simulate", "--slots", "3000", "--warmup", "0", "--trace", str(trace)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["slots_counted"] == 3000
    frame = pd.read_csv(trace)
    assert list(frame.columns) == TRACE_COLUMNS
    assert len(frame) == 3000


def test_simulate_rejects_long_warmup():
    assert main(["simulate", "--slots", "100", "--warmup", "100"]) == EXIT_CONFIG


def test_optimize(capsys):
    assert main(["optimize", "--mode", "conventional", "--starts", "4"]) == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed["status"] == "optimal"
    assert printed["mode"] == "conventional"
    assert printed["best_policy"]["a2"] == 0.0


def test_optimize_infeasible_arrivals(capsys):
    assert main(["optimize", "--starts", "2", "--lambda-p", "0.95"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["status"] == "infeasible"


def test_optimize_can_require_a_feasible_policy(capsys):
    args = ["optimize", "--starts", "2", "--lambda-p", "0.95", "--require-feasible"]
    assert main(args) == EXIT_UNEXPECTED
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "no feasible adaptive-power policy" in captured.err


def test_verify(tmp_path, capsys):
    out = tmp_path / "verify.csv"
    assert main(["verify", "--samples", "50000", "--out", str(out)]) == EXIT_OK
    assert "PASS" in capsys.readouterr().err
    frame = pd.read_csv(out)
    assert len(frame) == 36
