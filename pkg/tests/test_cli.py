import subprocess
import sys

import pytest

from risec import experiments as ex
from risec.cli import main
from risec.results import parse_csv, parse_json

SMALL = """
trials = 1
n_samples = 10
max_outer = 4
[scenario]
N = 2
M = 2
[sweeps]
power_dbm = [30.0]
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL)
    return p


def test_run_csv_and_determinism(small_cfg, tmp_path, monkeypatch):
    monkeypatch.setenv(ex.WORKERS_ENV, "1")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["--config", str(small_cfg), "--experiment", "power", "--system", "dfrc-rcg", "--no-timing"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = parse_csv(a.read_text())
    assert {r["algorithm"] for r in rows} == {"dfrc-rcg", "dfrc-rcg-noris"}


def test_json_and_seed_override(small_cfg, tmp_path, monkeypatch):
    monkeypatch.setenv(ex.WORKERS_ENV, "1")
    out = tmp_path / "x.json"
    assert main(["--config", str(small_cfg), "--experiment", "power", "--system", "dfrc-rcg",
                 "--seed", "18446744073709551615", "--trials", "1", "--format", "json", "--out", str(out)]) == 0
    assert len(parse_json(out.read_text())) == 2


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[scenario]\nN = 0\n")
    assert main(["--config", str(bad), "--experiment", "power"]) == 2
    assert "scenario.N" in capsys.readouterr().err
    assert main(["--experiment", "robust-eps", "--system", "rcce"]) == 2
    assert main(["--config", str(tmp_path / "missing.toml"), "--experiment", "power"]) == 2


def test_bad_arguments_exit_2():
    with pytest.raises(SystemExit) as e:
        main(["--experiment", "power", "--seed", "-1"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["--experiment", "nope"])
    assert e.value.code == 2


def test_print_config(capsys):
    assert main(["--experiment", "power", "--print-config", "--trials", "5"]) == 0
    out = capsys.readouterr().out
    assert "trials = 5" in out and "[scenario]" in out


def test_solver_failure_exit_3(small_cfg, tmp_path, monkeypatch):
    monkeypatch.setenv(ex.WORKERS_ENV, "1")

    def boom(*a, **k):
        raise RuntimeError("numerical breakdown")
    monkeypatch.setattr(ex, "run_rcg", boom)
    out = tmp_path / "f.csv"
    assert main(["--config", str(small_cfg), "--experiment", "power", "--system", "dfrc-rcg", "--out", str(out)]) == 3
    assert parse_csv(out.read_text())[0]["feasible"] is False


def test_unwritable_output_exit_1(small_cfg, tmp_path, monkeypatch):
    monkeypatch.setenv(ex.WORKERS_ENV, "1")
    out = tmp_path / "no" / "dir.csv"
    assert main(["--config", str(small_cfg), "--experiment", "power", "--system", "dfrc-rcg", "--out", str(out)]) == 1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "risec", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "RISEC_WORKERS" in r.stdout
