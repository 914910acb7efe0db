import subprocess
import sys

import pytest

from alaam.cli import main, read_config

from conftest import write_problem

EE_FAST = ["--ms", "100", "--mee", "3000", "--burnin", "1000", "--interval", "10"]


@pytest.fixture
def data(tmp_path):
    d = tmp_path / "data"
    d.mkdir()
    return write_problem(d)


def test_console_entry_point_version():
    out = subprocess.run([sys.executable, "-m", "alaam.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip()


def test_missing_subcommand_and_flags(tmp_path, data, capsys):
    assert main([]) == 1
    assert main(["estimate-sa", "--out-dir", str(tmp_path)]) == 1
    assert "--network" in capsys.readouterr().err
    assert main(["estimate-sa", *data]) == 1  # no --seed
    assert main(["gof", *data, "--seed", "1", "--theta", "0,0,0", "--threshold", "1.5"]) == 1


def test_bad_model_is_usage_error(tmp_path, data):
    args = [a if a != "Density, Contagion, oOb:b" else "Density, Nope" for a in data]
    assert main(["estimate-sa", *args, "--seed", "1", "--out-dir", str(tmp_path)]) == 1


def test_bad_network_is_data_error(tmp_path, data, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("*vertices 3\n*edges\n1 1\n")
    args = list(data)
    args[args.index("--network") + 1] = str(bad)
    assert main(["estimate-sa", *args, "--seed", "1", "--out-dir", str(tmp_path)]) == 2
    assert f"{bad}:3" in capsys.readouterr().err
    args = list(data)
    args[args.index("--network") + 1] = str(tmp_path / "missing.txt")
    assert main(["estimate-sa", *args, "--seed", "1", "--out-dir", str(tmp_path)]) == 2


def test_theta_length_checked(tmp_path, data):
    assert main(["simulate", *data, "--theta", "0,0", "--seed", "1", "--out-dir", str(tmp_path)]) == 1


def test_estimate_sa_outputs(tmp_path, data):
    out = tmp_path / "sa"
    assert main(["estimate-sa", *data, "--seed", "4", "--out-dir", str(out)]) == 0
    text = (out / "sa_estimates.txt").read_text()
    assert "converged = true" in text
    assert (out / "sa_estimates.csv").read_text().startswith("effect,estimate,stdError,tRatio\n")


def test_estimate_sa_nonconvergence_exit(tmp_path, data):
    rc = main(["estimate-sa", *data, "--seed", "4", "--m3", "20", "--max-restarts", "0",
               "--out-dir", str(tmp_path)])
    assert rc in (0, 3)
    assert ("converged = true" in (tmp_path / "sa_estimates.txt").read_text()) == (rc == 0)


def test_ee_split_runs_then_pool(tmp_path, data):
    whole, split = tmp_path / "whole", tmp_path / "split"
    assert main(["estimate-ee", *data, "--seed", "3", "--runs", "3", *EE_FAST, "--out-dir", str(whole)]) == 0
    for j in range(3):
        main(["estimate-ee", *data, "--seed", "3", "--runs", "3", "--run-index", str(j), *EE_FAST,
              "--out-dir", str(split)])
    assert main(["pool", "--out-dir", str(split), "--burnin", "1000", "--interval", "10"]) == 0
    for j in range(3):
        assert (whole / f"run_{j}.csv").read_bytes() == (split / f"run_{j}.csv").read_bytes()
    assert (whole / "pooled_estimates.csv").read_bytes() == (split / "pooled_estimates.csv").read_bytes()


def test_pool_without_runs(tmp_path):
    assert main(["pool", "--out-dir", str(tmp_path)]) == 2


def test_run_index_range(tmp_path, data):
    assert main(["estimate-ee", *data, "--seed", "1", "--runs", "2", "--run-index", "2",
                 "--out-dir", str(tmp_path)]) == 1


def test_manifest_round_trip(tmp_path, data):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", *data, "--theta", "-0.5,0.3,0.2", "--seed", "8", "--samples", "20",
                 "--burnin", "200", "--interval", "20", "--out-dir", str(first)]) == 0
    keys = dict(read_config(first / "manifest.txt"))
    assert keys["command"] == "simulate" and keys["seed"] == "8"
    assert main(["simulate", "--config", str(first / "manifest.txt"), "--out-dir", str(second)]) == 0
    assert (first / "samples.csv").read_bytes() == (second / "samples.csv").read_bytes()
    # flags override config values
    third = tmp_path / "c"
    assert main(["simulate", "--config", str(first / "manifest.txt"), "--seed", "9", "--out-dir", str(third)]) == 0
    assert (first / "samples.csv").read_bytes() != (third / "samples.csv").read_bytes()


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("bogus = 1\n")
    assert main(["simulate", "--config", str(cfg)]) == 1


def test_gof_and_degeneracy_files(tmp_path, data):
    assert main(["gof", *data, "--theta", "-1.0,0.5,0.3", "--seed", "2", "--samples", "200",
                 "--extra-effects", "Activity", "--threshold", "1.645", "--degeneracy",
                 "--out-dir", str(tmp_path)]) == 0
    text = (tmp_path / "gof_report.txt").read_text()
    assert "Activity" in text and "(|t| < 1.645)" in text
    assert (tmp_path / "degeneracy_summary.csv").exists()


def test_study_arms(tmp_path):
    args = ["study", "--model", "Density, Contagion", "--theta", "-1.0,0.3", "--nodes", "30",
            "--mean-degree", "3", "--samples", "2", "--runs", "2", "--ms", "100", "--mee", "5000",
            "--burnin", "2000", "--interval", "10", "--null", "Contagion",
            "--null-override", "Contagion:Density=-0.8", "--seed", "5", "--out-dir", str(tmp_path)]
    assert main(args) == 0
    head = (tmp_path / "study_report.csv").read_text().splitlines()[0]
    assert head == "effect,bias,RMSE,rate,rateCILow,rateCIHigh,coverage,samplesConverged,meanRunsConverged," \
                   "runsPerSample"
    assert (tmp_path / "study_report_null_Contagion.csv").exists()
