import csv
import json

import pytest
import yaml

from uvlab.cli import EXIT_CONFIG, EXIT_OK, build_parser, run, write_csv, Table


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_config(tmp_path, tree):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(tree))
    return path


def test_enumerate_k1(tmp_path):
    assert run(["enumerate", "--k", "1", "--out", str(tmp_path)]) == EXIT_OK
    rows = read_rows(tmp_path / "enumerate.csv")
    assert [(r["k"], r["count"]) for r in rows] == [("0", "1"), ("1", "4")]
    assert rows[1]["word_identity"] == "true"


def test_thresholds_infeasible_row(tmp_path):
    cfg = write_config(tmp_path, {"model": {"d": 3, "p": 0.5}})
    assert run(["thresholds", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
    (row,) = read_rows(tmp_path / "thresholds.csv")
    assert row["feasible"] == "false" and row["beta_min_K1"] == "1"


def test_sweep_without_coupling(tmp_path):
    cfg = write_config(tmp_path, {"model": {"coupling": 0.0},
                                  "discretization": {"cells_per_axis": 4, "boson_cap": 1}})
    assert run(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
    rows = read_rows(tmp_path / "sweep.csv")
    assert len(rows) == 4
    for r in rows:
        assert float(r["E"]) == 0.0 and float(r["e2"]) == 0.0 and float(r["E_minus_e2"]) == 0.0


@pytest.mark.parametrize("tree", [
    {"model": {"d": 5}},
    {"cutoffs": {"lambdas": [4.0, 2.0]}},
    {"cutoffs": {"lambdas": [40.0]}},  # Q_max too small
    {"solver": {"eig_tol": 0.0}},
    {"bogus": {}},
    {"model": {"colour": 1}},
])
def test_invalid_config_exits_1(tmp_path, tree):
    cfg = write_config(tmp_path, tree)
    assert run(["build", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    manifest = json.loads((tmp_path / "manifest.json").read_text()) if (tmp_path / "manifest.json").exists() else None
    assert manifest is None or manifest["status"] == EXIT_CONFIG


def test_unreadable_config_exits_1(tmp_path):
    assert run(["build", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_bad_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("UVLAB_THREADS", "many")
    assert run(["thresholds", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_manifest_contents(tmp_path):
    assert run(["thresholds", "--out", str(tmp_path), "--seed", "7"]) == EXIT_OK
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["command"] == "thresholds" and m["status"] == 0
    assert m["seeds"] == {"solver.seed": 7} and m["overrides"] == {"solver.seed": 7}
    assert set(m["versions"]) >= {"uvlab", "numpy", "scipy"}
    assert "thresholds.csv" in m["outputs"]


@pytest.mark.parametrize("command", ["build", "enumerate", "sweep", "algebra-check"])
def test_manifest_replay_is_byte_identical(tmp_path, command):
    cfg = write_config(tmp_path, {"discretization": {"cells_per_axis": 3, "boson_cap": 1},
                                  "cutoffs": {"lambdas": [2.0, 4.0, 8.0]}, "solver": {"k": 3}})
    first, second = tmp_path / "a", tmp_path / "b"
    assert run([command, "--config", str(cfg), "--out", str(first)]) == EXIT_OK
    assert run([command, "--config", str(first / "manifest.json"), "--out", str(second)]) == EXIT_OK
    m1 = json.loads((first / "manifest.json").read_text())
    m2 = json.loads((second / "manifest.json").read_text())
    assert m1["outputs"] == m2["outputs"]
    for name in m1["outputs"]:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_lambda_list_override(tmp_path):
    assert run(["build", "--lambda-list", "3,5", "--out", str(tmp_path)]) == EXIT_OK
    assert [r["Lambda"] for r in read_rows(tmp_path / "build.csv")] == ["3.0", "5.0"]


def test_float_cells_round_trip(tmp_path):
    x = 0.1 + 0.2
    write_csv(tmp_path / "t.csv", Table("t", ["x", "y", "flag"], [[x, -0.0, True]]))
    (row,) = read_rows(tmp_path / "t.csv")
    assert float(row["x"]) == x and row["y"] == "0.0" and row["flag"] == "true"


def test_parser_lists_every_subcommand():
    parser = build_parser()
    for name in ("algebra-check", "build", "counterterm", "thresholds", "neumann", "enumerate", "audit", "sweep"):
        assert parser.parse_args([name]).command == name
