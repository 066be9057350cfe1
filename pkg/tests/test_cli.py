import csv
import json

import pytest

from pbnco.cli import main

TINY = ["layers=1", "dim=8", "heads=2", "ff_dim=16", "n_min=10", "n_max=12", "validate_every=0"]


def _sets(*items):
    out = []
    for it in items:
        out += ["--set", it]
    return out


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["gen", "--n", "12", "--p", "0.3", "--seeds", "0:3", "--out", str(d / "inst")]) == 0
    assert main(["train", "cni", "--out", str(d / "cni.ckpt"),
                 *_sets(*TINY, "episodes=2", "population=3", "t_train=5")]) == 0
    assert main(["train", "cnc", "--out", str(d / "cnc.ckpt"),
                 *_sets(*TINY, "episodes=5", "k_max=4")]) == 0
    return d


def test_gen_then_oracle(tmp_path):
    assert main(["gen", "--n", "12", "--p", "0.3", "--seeds", "0:20", "--out", str(tmp_path)]) == 0
    assert main(["oracle", "--instances", str(tmp_path), "--out", str(tmp_path / "opt.csv")]) == 0
    rows = _rows(tmp_path / "opt.csv")
    assert len(rows) == 20 and all(float(r["reference"]) > 0 for r in rows)


def test_gen_rb(tmp_path):
    assert main(["gen", "--family", "RB", "--groups", "4", "--seeds", "1", "--out", str(tmp_path)]) == 0
    assert len(list(tmp_path.glob("*.graph"))) == 1


def test_train_writes_checkpoint_metrics_manifest(workspace):
    assert (workspace / "cnc.metrics.jsonl").exists()
    man = json.loads((workspace / "cnc.manifest.json").read_text())
    assert man["command"] == "train" and man["config"]["kind"] == "cnc"
    assert len(man["checkpoint_sha256"]) == 64 and "code_version" in man


def test_solve_zero_budget_and_ratio(workspace, tmp_path):
    inst = workspace / "inst"
    main(["oracle", "--instances", str(inst), "--out", str(tmp_path / "ref.csv")])
    out = tmp_path / "run"
    assert main(["solve", "--instances", str(inst), "--mode", "pbnco", "--budget-steps", "0",
                 "--cni", str(workspace / "cni.ckpt"), "--cnc", str(workspace / "cnc.ckpt"),
                 "--reference", str(tmp_path / "ref.csv"), "--out", str(out)]) == 0
    rows = _rows(out / "summary.csv")
    assert rows[-1]["instance"] == "MEAN" and len(rows) == 4
    for r in rows[:-1]:
        assert float(r["ratio"]) == pytest.approx(float(r["objective"]) / float(r["reference"]), abs=5e-4)
        assert len(_rows(out / "traces" / (r["instance"] + ".csv"))) == 1
    assert json.loads((out / "manifest.json").read_text())["config"]["steps"] == 0


def test_ratio_formatting(tmp_path):
    g = tmp_path / "k3.graph"
    g.write_text("p edge 3 3\ne 0 1\ne 1 2\ne 0 2\n")
    (tmp_path / "ref.csv").write_text("instance,reference\nk3,2\n")
    assert main(["solve", "--instances", str(g), "--method", "greedy", "--reference",
                 str(tmp_path / "ref.csv"), "--out", str(tmp_path / "o")]) == 0
    assert _rows(tmp_path / "o" / "summary.csv")[0]["ratio"] == "1.000"


@pytest.mark.parametrize("method", ["greedy", "ga", "pso", "cni-only", "random-restarts",
                                    "level1-mem", "cnc-pop", "cnc-greedy"])
def test_every_method_runs(workspace, tmp_path, method):
    assert main(["solve", "--instances", str(workspace / "inst"), "--method", method,
                 "--budget-steps", "5", "--cni", str(workspace / "cni.ckpt"),
                 "--cnc", str(workspace / "cnc.ckpt"), "--out", str(tmp_path)]) == 0
    assert len(_rows(tmp_path / "summary.csv")) == 4


def test_solve_deterministic_is_byte_identical(workspace, tmp_path):
    args = ["solve", "--instances", str(workspace / "inst"), "--budget-steps", "20",
            "--cni", str(workspace / "cni.ckpt"), "--cnc", str(workspace / "cnc.ckpt"),
            "--set", "patience=3", "--deterministic"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    for name in ["summary.csv"] + [f"traces/{p.name}" for p in (tmp_path / "a" / "traces").iterdir()]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_workers_match_serial(workspace, tmp_path):
    args = ["solve", "--instances", str(workspace / "inst"), "--method", "ga", "--budget-steps",
            "5", "--deterministic"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--workers", "2", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()


def test_diversity_and_pareto(workspace, tmp_path):
    assert main(["diversity", "--cnc", str(workspace / "cnc.ckpt"), "--instances",
                 str(workspace / "inst"), "--generated", "10", "--omega", "0.9",
                 "--out", str(tmp_path / "d.csv")]) == 0
    rows = _rows(tmp_path / "d.csv")
    assert len(rows) == 30 and rows[0]["mean_pairwise_hamming"] == "0.0"
    assert main(["pareto", "--cnc", str(workspace / "cnc.ckpt"), "--instances",
                 str(workspace / "inst"), "--cond-size", "4", "--out", str(tmp_path / "p.csv")]) == 0
    assert [r["omega"] for r in _rows(tmp_path / "p.csv")] == ["0.0", "0.25", "0.5", "0.75", "1.0"]


@pytest.mark.parametrize("argv, message", [
    (["solve", "--instances", "/nonexistent", "--out", "x"], "does not exist"),
    (["solve", "--instances", "{inst}", "--method", "tabu", "--out", "{tmp}"], "unknown method"),
    (["solve", "--instances", "{inst}", "--cni", "{ws}/cnc.ckpt", "--out", "{tmp}"], "expected cni"),
    (["solve", "--instances", "{inst}", "--set", "population=0", "--out", "{tmp}"], "population"),
    (["solve", "--instances", "{inst}", "--set", "speed=9", "--out", "{tmp}"], "unknown config key"),
    (["solve", "--instances", "{inst}", "--problem", "MIS", "--cni", "{ws}/cni.ckpt",
      "--cnc", "{ws}/cnc.ckpt", "--out", "{tmp}"], "trained for MC"),
    (["pareto", "--cnc", "{ws}/cnc.ckpt", "--instances", "{inst}", "--omegas", "2",
      "--out", "{tmp}/p.csv"], "omega"),
    (["gen", "--out", "{tmp}"], "--n and --p"),
])
def test_errors_exit_nonzero(workspace, tmp_path, capsys, argv, message):
    argv = [a.format(inst=workspace / "inst", ws=workspace, tmp=tmp_path) for a in argv]
    assert main(argv) == 2
    assert message in capsys.readouterr().err


def test_oracle_refuses_large(tmp_path, capsys):
    main(["gen", "--n", "30", "--p", "0.2", "--seeds", "0", "--out", str(tmp_path)])
    assert main(["oracle", "--instances", str(tmp_path)]) == 2
    assert "limited to 22" in capsys.readouterr().err


@pytest.mark.parametrize("problem", ["MC", "MIS"])
def test_solve_with_shipped_checkpoints(workspace, tmp_path, problem):
    out = tmp_path / "run"
    assert main(["solve", "--instances", str(workspace / "inst"), "--mode", "pbnco",
                 "--problem", problem, "--cni", "shipped", "--cnc", "shipped",
                 "--budget-steps", "5", "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert set(man["checkpoint_sha256"]) == {"cni", "cnc"}


def test_pareto_with_shipped_cnc(workspace, tmp_path):
    assert main(["pareto", "--cnc", "shipped", "--instances", str(workspace / "inst"),
                 "--omegas", "0,1", "--out", str(tmp_path / "p.csv")]) == 0
    assert len(_rows(tmp_path / "p.csv")) == 2
