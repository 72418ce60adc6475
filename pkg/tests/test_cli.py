import csv
import json
import os
import subprocess
import sys

import pytest

from sparse_poisson.cli import main


@pytest.fixture
def config(tmp_path):
    doc = {"model": {"n": 30, "p": 4, "sigma": 0.5, "mu0": 1.0,
                     "preset": {"kind": "uniform_lift", "s": 2, "delta": 2.0}},
           "estimators": ["naive", "oracle", "ght"], "reps": 200, "seed": 3}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_simulate(tmp_path, config):
    out = tmp_path / "risk.csv"
    assert main(["simulate", "--config", str(config), "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert [r["estimator"] for r in rows] == ["naive", "oracle", "ght"]


def test_sweep(tmp_path, config):
    grid = write(tmp_path, "grid.json", {"axes": {"s": [1, 2], "lambda_scale": [1, 40]}})
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--config", str(config), "--grid", grid, "--out", str(out)]) == 0
    assert len(list(csv.DictReader(open(out)))) == 12


def test_sweep_too_large(tmp_path, config):
    grid = write(tmp_path, "grid.json", {"axes": {"n": list(range(1, 200)),
                                                  "sigma": [0.1 * k for k in range(1, 60)]}})
    assert main(["sweep", "--config", str(config), "--grid", grid,
                 "--out", str(tmp_path / "x.csv")]) == 2


def test_verify_lemma1(tmp_path, capsys):
    out = tmp_path / "tail.csv"
    assert main(["verify-lemma1", "--p", "8", "--nu", "25", "--reps", "20000", "--seed", "1",
                 "--u", "40", "200", "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert [r["pass"] for r in rows] == ["true", ""]
    assert [r["in_range"] for r in rows] == ["true", "false"]


def test_verify_kl(tmp_path, capsys):
    grid = write(tmp_path, "kl.json", {"n": [100, 1000], "s": [4], "sigma": 1.0, "mu0": [1.0],
                                       "eps": [0.5, 1.0]})
    out = tmp_path / "kl.csv"
    assert main(["verify-kl", "--grid", grid, "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 4 and all(r["pass"] == "true" for r in rows)
    assert "0 violations" in capsys.readouterr().out


def test_verify_kl_series_cap_exit_code(tmp_path):
    grid = write(tmp_path, "kl.json", {"n": 10, "s": 3, "sigma": 1e-3, "mu0": 10.0, "eps": 1.0})
    assert main(["verify-kl", "--grid", grid, "--out", str(tmp_path / "kl.csv")]) == 3


def test_lower_bound_thm2(tmp_path, capsys):
    cfg = write(tmp_path, "lb.json", {"n": 32768, "s": 128, "sigma": 1.0, "mu0": 1.0})
    out = tmp_path / "lb.json.out"
    assert main(["lower-bound", "--mode", "thm2", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["checks"]["kl_exact <= 1/8"]["pass"] is True
    assert "separation" in capsys.readouterr().out


def test_lower_bound_thm3(tmp_path):
    cfg = write(tmp_path, "lb.json", {"n": 50, "p": 16, "s": 2, "sigma": 1.0, "mu0": 1.0,
                                      "mu_inf": 2.0, "seed": 0})
    out = tmp_path / "lb3.json"
    assert main(["lower-bound", "--mode", "thm3", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert all(c["pass"] for c in doc["checks"].values())


def test_lower_bound_bad_config(tmp_path):
    cfg = write(tmp_path, "lb.json", {"n": 50, "p": 8, "s": 2, "sigma": 1.0, "mu0": 1.0,
                                      "mu_inf": 2.0})
    assert main(["lower-bound", "--mode", "thm3", "--config", cfg,
                 "--out", str(tmp_path / "o.json")]) == 2
    assert main(["lower-bound", "--mode", "thm2", "--config", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "o.json")]) == 2


def test_packing(tmp_path, capsys):
    out = tmp_path / "pack.json"
    assert main(["packing", "--p", "16", "--seed", "0", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["m"] == 8 and len(doc["subsets"]) == 9 and doc["subsets"][0] == []
    assert "m=8" in capsys.readouterr().out


def test_invalid_model_exit_code(tmp_path):
    doc = {"model": {"n": 4, "p": 2, "sigma": 1.0, "mu0": [1.0, 1.0], "mu_inf": 0.5,
                     "signals": {}}, "estimators": ["naive"], "reps": 10, "seed": 0}
    cfg = write(tmp_path, "bad.json", doc)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o.csv")]) == 2


def test_module_entry_point_is_deterministic(tmp_path, config):
    outs = []
    for threads in ("1", "2"):
        out = tmp_path / f"run{threads}.csv"
        env = dict(os.environ, NUM_THREADS=threads)
        subprocess.run([sys.executable, "-m", "sparse_poisson", "simulate", "--config",
                        str(config), "--out", str(out)], check=True, env=env)
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
