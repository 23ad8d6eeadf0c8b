import csv
import json

import pytest

from risaccess.channels import load_dictionary_dump
from risaccess.cli import main

MICRO = ["--set", "K=12", "--set", "M=4", "--set", "N1=2", "--set", "N2=2", "--set", "L=10",
         "--set", "lambda_alpha=0.3", "--set", "amp.I_max=20"]


def test_simulate_writes_all_outputs(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--out", str(out), "--trajectory", "--genie", "--seed", "5", *MICRO]) == 0
    for name in ("report.csv", "report.json", "trajectory.csv", "dictionaries.bin", "estimates.npz"):
        assert (out / name).exists(), name
    rows = list(csv.DictReader(open(out / "report.csv")))
    assert len(rows) == 1 and rows[0]["trial"] == "0"
    doc = json.loads((out / "report.json").read_text())
    assert doc["provenance"]["root_seed"] == 5
    assert load_dictionary_dump(out / "dictionaries.bin")["A_B"].shape == (4, 8)


def test_sweep_from_config_file(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("profile: desk\nK: 12\nM: 4\nN1: 2\nN2: 2\namp.I_max: 20\n"
                   "sweep.parameter: L\nsweep.values: [8, 12]\nsweep.trials: 2\n")
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(cfg), "--out", str(out), "--no-genie"]) == 0
    rows = list(csv.DictReader(open(out / "report.csv")))
    assert [r["point"] for r in rows] == ["L=8", "L=8", "L=12", "L=12"]


def test_sweep_is_byte_identical_across_workers(tmp_path):
    args = ["sweep", "--param", "snr_db", "--values", "10,30", "--trials", "3", *MICRO]
    assert main([*args, "--out", str(tmp_path / "a"), "--workers", "1"]) == 0
    assert main([*args, "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    assert (tmp_path / "a/report.csv").read_bytes() == (tmp_path / "b/report.csv").read_bytes()


def test_phase_transition_command(tmp_path, capsys):
    assert main(["phase-transition", "--x-values", "6,10", "--y-values", "4", "--trials", "1",
                 "--out", str(tmp_path), *MICRO]) == 0
    assert "success rate" in capsys.readouterr().out
    assert json.loads((tmp_path / "report.json").read_text())["success"]


@pytest.mark.parametrize("args", [
    ["sweep", "--param", "N", "--values", "15"],
    ["sweep"],
    ["simulate", "--set", "L=0"],
    ["simulate", "--set", "bogus"],
    ["simulate", "--config", "/nonexistent.yaml"],
])
def test_config_errors_exit_2(tmp_path, args):
    assert main([*args, "--out", str(tmp_path)]) == 2


def test_all_failed_exit_3(tmp_path, monkeypatch):
    import risaccess.experiments as ex

    def boom(*a, **k):
        raise RuntimeError("injected")

    monkeypatch.setattr(ex, "run_trial", boom)
    assert main(["sweep", "--param", "L", "--values", "8", "--trials", "2", "--out", str(tmp_path), *MICRO]) == 3
    rows = list(csv.DictReader(open(tmp_path / "report.csv")))
    assert all(r["failed"] == "1" and "injected" in r["error"] for r in rows)


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    assert capsys.readouterr().out.count("[PASS]") == 3
