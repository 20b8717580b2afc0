import csv
import subprocess
import sys

import pytest

from qdiscern.cli import main
from qdiscern.config import bundled_config_path


def run(tmp_path, monkeypatch, *args):
    monkeypatch.chdir(tmp_path)
    code = main(list(args) + ["--out", "report.csv"])
    report = tmp_path / "report.csv"
    return code, (report.read_bytes() if report.exists() else None)


def rows(data):
    return list(csv.DictReader(data.decode().splitlines()))


def test_fisher_qubit(tmp_path, monkeypatch):
    code, data = run(tmp_path, monkeypatch, "fisher", "--trials", "50")
    assert code == 0
    by = {r["measurement"]: r for r in rows(data)}
    for m in ("pi", "sld"):
        assert float(by[m]["fisher_analytic"]) == pytest.approx(4, rel=1e-8)
        assert float(by[m]["quantum_fisher"]) == pytest.approx(4, rel=1e-8)
        assert abs(float(by[m]["gap"])) < 1e-8
    meta = (tmp_path / "report.csv.meta.yaml").read_text()
    assert "random_violations: 0" in meta and "versions:" in meta


def test_power_dt_zero(tmp_path, monkeypatch):
    code, data = run(tmp_path, monkeypatch, "power", "--dt", "0,0.05", "--n", "1,4")
    assert code == 0
    for r in rows(data):
        if float(r["dt"]) == 0:
            assert float(r["exact_power"]) == pytest.approx(0.05, abs=1e-12)


def test_stein_reference(tmp_path, monkeypatch):
    code, data = run(tmp_path, monkeypatch, "stein", "--p0", "0.5,0.5", "--p1", "0.8,0.2", "--n", "10,40")
    assert code == 0
    out = rows(data)
    assert all(float(r["reference_exp_minus_D"]) == pytest.approx(0.8, rel=1e-14) for r in out)
    assert float(out[1]["beta_root"]) == pytest.approx(0.8820463753459418, rel=1e-12)


def test_condition_and_float_format(tmp_path, monkeypatch):
    code, data = run(tmp_path, monkeypatch, "condition", "--dt", "0.1", "--n", "1,10000")
    assert code == 0
    a, b = rows(data)
    assert a["value"] == "2.0000000000000004e-02" or float(a["value"]) == pytest.approx(0.02)
    assert a["satisfied"] == "true" and b["satisfied"] == "false"


def test_anomaly_ratios(tmp_path, monkeypatch):
    code, data = run(tmp_path, monkeypatch, "anomaly", "--dt", "0.001", "--n", "")
    assert code == 0
    by = {r["measurement"]: float(r["stein_ratio"]) for r in rows(data)}
    assert by["pi"] == pytest.approx(0.5, abs=1e-5)
    assert by["sld"] == pytest.approx(1.0, abs=1e-5)


def test_sudden(tmp_path, monkeypatch):
    cfg = str(bundled_config_path("two_segment.yaml"))
    code, data = run(tmp_path, monkeypatch, "sudden", "--config", cfg)
    assert code == 0
    assert len(rows(data)) == 9


def test_config_error_exit(tmp_path, monkeypatch, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(bundled_config_path().read_text().replace("[[0.0, 0.0], [-1.0, 0.0]]", "[[3.0, 0.0], [-1.0, 0.0]]"))
    code, data = run(tmp_path, monkeypatch, "fisher", "--config", str(bad))
    assert code == 2 and data is None
    assert "config error" in capsys.readouterr().err


def test_unnormalized_state(tmp_path, monkeypatch):
    bad = tmp_path / "bad.yaml"
    bad.write_text(bundled_config_path().read_text().replace("0.7071067811865476", "1.0"))
    assert run(tmp_path, monkeypatch, "condition", "--config", str(bad))[0] == 2
    assert run(tmp_path, monkeypatch, "condition", "--config", str(bad), "--normalize-state")[0] == 0


def test_stationary_state_exit(tmp_path, monkeypatch):
    cfg = tmp_path / "up.yaml"
    text = bundled_config_path().read_text().replace(
        "- [0.7071067811865476, 0.0]\n    - [0.7071067811865476, 0.0]", "- [1.0, 0.0]\n    - [0.0, 0.0]")
    cfg.write_text(text)
    # the SLD measurement does not exist for an eigenstate
    assert run(tmp_path, monkeypatch, "fisher", "--config", str(cfg))[0] == 2


def test_infeasible_exit(tmp_path, monkeypatch):
    code, data = run(tmp_path, monkeypatch, "power", "--n", "3000000", "--dt", "0.01")
    assert code == 3 and data is None


def test_dump_config(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["power", "--dump-config", "--alpha", "0.1"]) == 0
    text = capsys.readouterr().out
    dumped = tmp_path / "c.yaml"
    dumped.write_text(text)
    assert main(["power", "--config", str(dumped), "--dump-config"]) == 0
    assert capsys.readouterr().out == text


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("QDISCERN_THREADS", "x")
    assert run(tmp_path, monkeypatch, "condition")[0] == 2


def test_console_script(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "qdiscern.cli", "condition", "--out", str(tmp_path / "c.csv")],
        capture_output=True, text=True,
    )
    assert out.returncode == 0
    assert "report:" in out.stdout
