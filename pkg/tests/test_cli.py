import os

import numpy as np
import pandas as pd
import pytest

from runtime.app import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from utils.io_helpers import AGGREGATE_COLUMNS, TRACE_COLUMNS, read_json


def test_help_exits_cleanly():
    assert main(["--help"]) == EXIT_OK


def test_unknown_command():
    assert main(["train"]) == EXIT_CONFIG


def test_analyze_set1(tmp_path, config_path):
    out = str(tmp_path / "analysis")
    assert main(["analyze", "--config", config_path("set1.yaml"), "--out", out]) == EXIT_OK
    partition = read_json(os.path.join(out, "partition.json"))
    assert partition["optimal_safe"] == "{1,3,4}"
    assert partition["mu_star"] == pytest.approx(1.25)
    assert "{1,2,3}" in partition["risky"]
    assert (partition["q"], partition["Q"]) == (1, 3)
    solutions = pd.read_csv(os.path.join(out, "gaps_solutions.csv"))
    assert len(solutions) == 175
    items = pd.read_csv(os.path.join(out, "gaps_items.csv"))
    assert list(items["item"]) == list(range(1, 11))
    with open(os.path.join(out, "warnings.txt"), encoding="utf-8") as file:
        assert "undefined: safe_suboptimal_min[item 1]" in file.read()


def test_analyze_records_budget_warning(tmp_path, config_path):
    out = str(tmp_path / "analysis")
    assert main(["analyze", "--config", config_path("set2.yaml"), "--out", out]) == EXIT_OK
    with open(os.path.join(out, "warnings.txt"), encoding="utf-8") as file:
        assert "no solution is absolutely safe" in file.read()


def test_analyze_missing_config(tmp_path):
    out = str(tmp_path / "analysis")
    assert main(["analyze", "--config", str(tmp_path / "absent.yaml"), "--out", out]) == EXIT_CONFIG
    assert not os.path.exists(out)


def test_analyze_invalid_instance(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("means: [0.5, 0.3]\nvariances: [0.01, 0.01]\nK: 2\nsigma_bar_sq: 0.02\n")
    assert main(["analyze", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_simulate(tmp_path, config_path):
    out = str(tmp_path / "run")
    argv = [
        "simulate",
        "--config", config_path("set1.yaml"),
        "--out", out,
        "--seed", "7",
        "--T", "3e2",
        "--algorithm", "combucb1",
    ]
    assert main(argv) == EXIT_OK
    trace = pd.read_csv(os.path.join(out, "trace.csv"))
    assert tuple(trace.columns) == TRACE_COLUMNS
    assert len(trace) == 300
    aggregate = pd.read_csv(os.path.join(out, "aggregate.csv"))
    assert tuple(aggregate.columns) == AGGREGATE_COLUMNS
    assert aggregate["t"].iloc[-1] == 300
    summary = read_json(os.path.join(out, "summary.json"))
    assert summary["config"]["T"] == 300
    assert summary["config"]["master_seed"] == 7
    assert summary["any_violation_rate"] == 1.0


def test_simulate_budget_override(tmp_path, config_path):
    out = str(tmp_path / "run")
    argv = [
        "simulate",
        "--config", config_path("set1.yaml"),
        "--out", out,
        "--seed", "1",
        "--T", "200",
        "--sigma-bar-sq", "0.6",
    ]
    assert main(argv) == EXIT_OK
    assert read_json(os.path.join(out, "summary.json"))["config"]["sigma_bar_sq"] == 0.6


@pytest.mark.parametrize(
    "extra",
    [["--algorithm", "thompson"], ["--T", "0"], ["--T", "2.5"], ["--delta", "1.5"]],
)
def test_simulate_rejects_bad_arguments(tmp_path, config_path, extra):
    argv = ["simulate", "--config", config_path("set1.yaml"), "--out", str(tmp_path), "--seed", "1"]
    assert main(argv + extra) == EXIT_CONFIG


def test_simulate_needs_a_seed(tmp_path, config_path):
    argv = ["simulate", "--config", config_path("set1.yaml"), "--out", str(tmp_path)]
    assert main(argv) == EXIT_CONFIG


def test_bounds(tmp_path, config_path):
    out = str(tmp_path / "bounds")
    argv = [
        "bounds",
        "--config", config_path("set1.yaml"),
        "--T", "100000",
        "--delta", "0.05",
        "--out", out,
    ]
    assert main(argv) == EXIT_OK
    report = read_json(os.path.join(out, "hardness_report.json"))
    assert report["Q"] == 3
    assert report["bounds"]["naive"] == pytest.approx(125_000)
    H = pd.read_csv(os.path.join(out, "hardness_H.csv"))
    assert list(H["r_prime"]) == [1, 2, 3]
    assert H["H"].iloc[-1] == 0.0


def test_experiment_two(tmp_path):
    out = str(tmp_path / "exp2")
    argv = ["experiment", "--id", "2", "--out", out, "--seed", "3", "--T", "300", "--reps", "2"]
    assert main(argv) == EXIT_OK
    for name in (
        "aggregate_pascomb_0.4.csv",
        "aggregate_combucb1_0.4.csv",
        "curves_pascomb_0.4.csv",
        "additional_pascomb_0.4.csv",
        "summary.json",
    ):
        assert os.path.exists(os.path.join(out, name)), name
    summary = read_json(os.path.join(out, "summary.json"))
    assert summary["experiment"] == 2
    assert summary["runs"]["combucb1@0.4"]["replications"] == 2


def test_unknown_experiment(tmp_path):
    assert main(["experiment", "--id", "4", "--out", str(tmp_path), "--seed", "1"]) == EXIT_CONFIG


def test_same_seed_writes_identical_traces(tmp_path, config_path):
    outputs = []
    for name in ("first", "second"):
        out = str(tmp_path / name)
        argv = ["simulate", "--config", config_path("set1.yaml"), "--out", out, "--seed", "5", "--T", "500"]
        assert main(argv) == EXIT_OK
        with open(os.path.join(out, "trace.csv"), "rb") as file:
            outputs.append(file.read())
    assert outputs[0] == outputs[1]


@pytest.fixture
def replicated_config(tmp_path, config_path):
    with open(config_path("set1.yaml"), encoding="utf-8") as file:
        text = file.read().replace("replications: 1", "replications: 4")
    path = tmp_path / "set1_reps.yaml"
    path.write_text(text)
    return str(path)


def test_simulate_writes_realized_regret_on_request(tmp_path, replicated_config):
    outputs = {}
    for name, extra in (("pseudo", []), ("realized", ["--realized"])):
        out = str(tmp_path / name)
        argv = ["simulate", "--config", replicated_config, "--out", out, "--seed", "4", "--T", "400"]
        assert main(argv + extra) == EXIT_OK
        outputs[name] = (
            pd.read_csv(os.path.join(out, "aggregate.csv")),
            pd.read_csv(os.path.join(out, "curves.csv")),
        )
    aggregate, curves = outputs["realized"]
    assert tuple(aggregate.columns) == AGGREGATE_COLUMNS
    assert np.allclose(aggregate["mean_regret"], curves["mean_realized_regret"])
    assert np.allclose(aggregate["se_regret"], curves["se_realized_regret"])
    aggregate, curves = outputs["pseudo"]
    assert np.allclose(aggregate["mean_regret"], curves["mean_regret"])
    assert not np.allclose(outputs["pseudo"][0]["mean_regret"], outputs["realized"][0]["mean_regret"])


def test_experiment_writes_realized_regret_on_request(tmp_path):
    out = str(tmp_path / "exp2")
    argv = ["experiment", "--id", "2", "--out", out, "--seed", "3", "--T", "300", "--reps", "2", "--realized"]
    assert main(argv) == EXIT_OK
    aggregate = pd.read_csv(os.path.join(out, "aggregate_pascomb_0.4.csv"))
    curves = pd.read_csv(os.path.join(out, "curves_pascomb_0.4.csv"))
    assert np.allclose(aggregate["mean_regret"], curves["mean_realized_regret"])


def test_parallel_and_serial_write_identical_aggregates(tmp_path, replicated_config):
    outputs = []
    for workers in ("1", "2"):
        out = str(tmp_path / f"workers{workers}")
        argv = [
            "simulate",
            "--config", replicated_config,
            "--out", out,
            "--seed", "9",
            "--T", "400",
            "--parallel", workers,
        ]
        assert main(argv) == EXIT_OK
        with open(os.path.join(out, "aggregate.csv"), "rb") as file:
            outputs.append(file.read())
    assert outputs[0] == outputs[1]


def test_experiment_failure_during_runs_is_a_runtime_error(tmp_path, monkeypatch):
    import lab.reports

    def mismatched(pascomb, baseline):
        raise lab.reports.CheckpointMismatchError("grids differ")

    monkeypatch.setattr(lab.reports, "additional_regret", mismatched)
    out = str(tmp_path / "exp2")
    argv = ["experiment", "--id", "2", "--out", out, "--seed", "3", "--T", "300", "--reps", "2"]
    assert main(argv) == EXIT_RUNTIME
    assert not os.path.exists(os.path.join(out, "summary.json"))
