"""End-to-end command-line flows on a tiny synthetic dataset."""

import csv
import json

import pytest

from cli import run_command
from training.records import EpochStats, RunRecord, save_run_record

TINY_ARCHITECTURE = {
    "kind": "cnn",
    "conv_blocks": [{"channels": 3, "kernel_size": 3}, {"channels": 4, "kernel_size": 3}],
    "hidden_units": 8,
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """make-data + train once; the tests below read the outputs."""
    root = tmp_path_factory.mktemp("cli")
    assert run_command([
        "make-data", "blobs", "--out", str(root / "data"),
        "--k", "3", "--per-cluster", "8", "--side", "12", "--seed", "0",
    ]) == 0
    config = {
        "batch_size": 12,
        "epochs": 2,
        "n_runs": 2,
        "seed": 3,
        "dataset": "data",
        "architecture": TINY_ARCHITECTURE,
    }
    (root / "config.json").write_text(json.dumps(config))
    assert run_command(["train", "--config", str(root / "config.json"), "--out", str(root / "out")]) == 0
    return root


def test_train_layout(workspace):
    out = workspace / "out"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_runs"] == 2
    assert summary["aborted_runs"] == []
    assert [layer.get("layer") for layer in summary["layers"]] == [1, 2, None, None]
    assert summary["layers"][-1] == {"kind": "clustering_head", "output_shape": [3]}
    session = json.loads((out / "audit_session.json").read_text())
    assert "checkpoint" in {entry["event_type"] for entry in session["entries"]}
    assert (out / "config.json").exists()
    assert (out / "checkpoint" / "manifest.json").exists()
    for i in range(2):
        record = json.loads((out / "runs" / f"run_{i:03d}" / "record.json").read_text())
        assert record["seed"] == 3 + i
        assert record["checkpoint"] == f"runs/run_{i:03d}/checkpoint"
        assert len(record["history"]) == 2
        assert record["history"][0]["accuracy"] is not None


def test_eval_reproduces_selected_accuracy(workspace, capsys):
    code = run_command([
        "eval", "--checkpoint", str(workspace / "out" / "checkpoint"), "--data", str(workspace / "data"),
    ])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    summary = json.loads((workspace / "out" / "summary.json").read_text())
    assert report["accuracy"] == pytest.approx(summary["selected_accuracy"])
    assert report["n"] == 24 and report["k"] == 3
    assert sum(report["cluster_sizes"]) == 24


def test_sweep_zero_lambda_matches_train(workspace):
    out = workspace / "sweep"
    code = run_command([
        "sweep", "--param", "lambda", "--values", "0", "--config", str(workspace / "config.json"), "--out", str(out),
    ])
    assert code == 0
    cells = json.loads((out / "sweep.json").read_text())["cells"]
    summary = json.loads((workspace / "out" / "summary.json").read_text())
    assert cells[0]["selected"] == pytest.approx(summary["selected_accuracy"])
    with open(out / "sweep.csv", newline="", encoding="utf-8") as f:
        assert [row["status"] for row in csv.DictReader(f)] == ["ok"]


def test_viz_importance(workspace):
    out = workspace / "importance"
    code = run_command([
        "viz-importance", "--checkpoint", str(workspace / "out" / "checkpoint"), "--data", str(workspace / "data"),
        "--layer", "1", "--out", str(out), "--count", "3",
    ])
    assert code == 0
    names = sorted(p.name for p in out.glob("*.pgm"))
    assert names == sorted(f"layer{l}_obs{i}.pgm" for l in (0, 1) for i in range(3))
    assert len(json.loads((out / "importance.json").read_text())["maps"]) == 6


def test_viz_importance_bad_layer(workspace):
    code = run_command([
        "viz-importance", "--checkpoint", str(workspace / "out" / "checkpoint"), "--data", str(workspace / "data"),
        "--layer", "5", "--out", str(workspace / "nowhere"),
    ])
    assert code == 1


def test_viz_clusters(workspace):
    out = workspace / "grid.pgm"
    code = run_command([
        "viz-clusters", "--checkpoint", str(workspace / "out" / "checkpoint"), "--data", str(workspace / "data"),
        "--out", str(out), "--per-row", "4",
    ])
    assert code == 0
    assert out.read_bytes().startswith(b"P5")


def test_ofm(tmp_path, capsys):
    history = [
        EpochStats(epoch=i, total_loss=loss, main={"total": loss}, accuracy=acc)
        for i, (loss, acc) in enumerate([(2.0, 0.3), (1.5, 0.5), (1.2, 0.6), (1.0, 0.7)])
    ]
    path = save_run_record(RunRecord(run_index=0, seed=0, final_loss=1.0, history=history), tmp_path / "record.json")
    assert run_command(["ofm", "--run", str(path)]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["correlation"] < -0.9
    assert json.loads((tmp_path / "ofm.json").read_text()) == printed


def test_ofm_without_accuracy(tmp_path):
    path = save_run_record(RunRecord(run_index=0, seed=0), tmp_path / "record.json")
    assert run_command(["ofm", "--run", str(path)]) == 1


def test_make_sequences(tmp_path):
    out = tmp_path / "seqs"
    assert run_command(["make-data", "seqs", "--out", str(out), "--k", "2", "--per-cluster", "4"]) == 0
    meta = json.loads((out / "meta.json").read_text())
    assert (meta["kind"], meta["n"], meta["dim"]) == ("sequence", 8, 2)
    assert run_command(["make-data", "seqs", "--out", str(out), "--min-length", "9", "--max-length", "3"]) == 1


@pytest.mark.parametrize("argv", [
    ["train", "--config", "x.json", "--bogus"],
    ["sweep", "--param", "epochs", "--values", "1", "--config", "x", "--out", "y"],
    [],
])
def test_usage_errors(argv):
    assert run_command(argv) == 2


def test_missing_checkpoint(tmp_path):
    assert run_command(["eval", "--checkpoint", str(tmp_path / "nope"), "--data", str(tmp_path)]) == 1
