import csv
import json
import subprocess
import sys
from importlib.resources import files

import numpy as np
import pytest

from lattice_rd.cli import main

DEMO = str(files("lattice_rd").joinpath("data/demo.json"))
CONVERGE = str(files("lattice_rd").joinpath("data/converge_demo.json"))


def read_trajectory(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config: ")
    config = json.loads(lines[0][len("# config: "):])
    rows = list(csv.DictReader(lines[1:]))
    return config, rows


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_simulate_demo(tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "--config", DEMO, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "ok" and summary["exit_code"] == 0
    assert summary["gate"]["stable"]
    assert summary["monitors"]["range_violations"] == 0
    assert summary["seeds"]["root"] == 7
    config, rows = read_trajectory(out / "trajectory.csv")
    assert config["k"] == summary["config"]["k"]
    assert list(rows[0]) == ["n", "t", "m", "x", "s", "c"]
    s = np.array([float(r["s"]) for r in rows])
    assert s.min() >= 0 and s.max() < 1.0


def test_simulate_is_bit_reproducible(tmp_path):
    for name in ("a", "b"):
        assert main(["simulate", "--config", DEMO, "--seed", "11", "--out",
                     str(tmp_path / name)]) == 0
    for f in ("trajectory.csv", "summary.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert main(["simulate", "--config", DEMO, "--seed", "12", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() != \
        (tmp_path / "c" / "trajectory.csv").read_bytes()


def test_zero_data_run(tmp_path):
    cfg = write(tmp_path, "zero.json", {"T": 0.2, "M": 30})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "z")]) == 0
    _, rows = read_trajectory(tmp_path / "z" / "trajectory.csv")
    assert all(float(r["s"]) == 0.0 for r in rows)
    assert all(float(r["c"]) == 0.5 for r in rows)


def test_gate_refusal_exit_code(tmp_path):
    out = tmp_path / "g"
    assert main(["simulate", "--config", DEMO, "--k", "0.01", "--out", str(out)]) == 2
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "refused" and not summary["gate"]["stable"]
    assert not (out / "trajectory.csv").exists()


def test_inadmissible_b_eta_exit_code(tmp_path):
    assert main(["simulate", "--B", "1", "--eta", "1", "--out", str(tmp_path / "b")]) == 2


def test_divergence_exit_code(tmp_path):
    cfg = write(tmp_path, "div.json", {
        "T": 2.0, "k": 0.02, "M": 40,
        "s0": {"family": "sin_bump", "params": {"amp": 0.9, "width": 2.0}}})
    out = tmp_path / "d"
    assert main(["simulate", "--config", cfg, "--allow-unstable", "--out", str(out)]) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "diverged" and set(summary["diverged"]) == {"n", "m"}


def test_io_and_schema_errors(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "e")]) == 1
    bad = write(tmp_path, "bad.json", {"lamda": 1})
    assert main(["simulate", "--config", bad, "--out", str(tmp_path / "e")]) == 1
    bad_t = write(tmp_path, "badt.json", {"T": 0.2, "k": 0.003})
    assert main(["simulate", "--config", bad_t, "--out", str(tmp_path / "e")]) == 1


def test_split_solver_from_cli(tmp_path):
    assert main(["simulate", "--config", DEMO, "--solver", "split",
                 "--out", str(tmp_path / "s")]) == 0


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("LATTICE_RD_OUT", str(tmp_path / "env"))
    assert main(["kernel"]) == 0
    assert (tmp_path / "env" / "kernel.csv").exists()


def test_kernel_command(tmp_path):
    cfg = write(tmp_path, "k.json", {"h": 0.1, "times": [0.1], "n_max": 5})
    assert main(["kernel", "--config", cfg, "--out", str(tmp_path)]) == 0
    mass = (tmp_path / "kernel_mass.csv").read_text().splitlines()
    assert mass[1] == "t,mass,mass_residual"
    assert float(mass[2].split(",")[2]) < 1e-10


def test_besov_command(tmp_path):
    cfg = write(tmp_path, "b.json", {"hs": [0.2, 0.1], "ps": [2.0]})
    assert main(["besov", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "norms.csv").read_text().splitlines()))
    assert len(rows) == 4 and {float(r["p"]) for r in rows} == {2.0}


def test_fk_command(tmp_path):
    cfg = write(tmp_path, "f.json", {"probes": [2], "n_samples": 20000, "N": 500})
    assert main(["fk", "--config", cfg, "--seed", "3", "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "fk.json").read_text())
    est = res["estimates"][0]
    assert abs(est["mean"] - est["deterministic"]) <= 4 * est["std"] / np.sqrt(est["n"])


@pytest.mark.slow
def test_converge_command(tmp_path):
    assert main(["converge", "--config", CONVERGE, "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "convergence.json").read_text())
    assert data["rows"][-1]["ratio_besov_L2t"] >= 1.3
    assert (tmp_path / "convergence.csv").read_text().startswith("# config: ")


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lattice_rd.cli", "simulate", "--k", "0.01",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "exceeds" in proc.stderr
