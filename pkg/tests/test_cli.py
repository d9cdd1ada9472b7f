import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from qfelo import cli, io
from qfelo.momentum import MomentumDistribution
from qfelo.params import QuantumOscParams
from qfelo.quantum_stats import photon_statistics

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMOKE = """\
Na: 150
alpha_at_Na: 0.1
sweep:
  scenario: theta_vs_momentum
  theta: {start: 0.0, stop: 1.0, num: 2}
  second: {start: 0.5, stop: 0.6, num: 2}
"""


def write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_stats_csv_moments(tmp_path):
    assert run("stats", "--config", CONFIGS / "small_signal.yaml", "--out", tmp_path, "--tag", "t") == 0
    header, rows = io.read_csv(tmp_path / "stats_t.csv")
    assert header == ["n", "P_n"]
    n = np.array([int(r[0]) for r in rows])
    P = np.array([float(r[1]) for r in rows])
    s = photon_statistics(MomentumDistribution.delta(0.5), QuantumOscParams.from_delta(0.05, 2e4, 20.0))
    mean = n @ P
    assert np.array_equal(P, s.probabilities)
    assert abs(mean - s.mean) <= 1e-12 * s.mean
    assert abs(((n - mean) ** 2 @ P) / mean - s.fano) <= 1e-12 * s.fano
    summary = json.loads((tmp_path / "stats_t_summary.json").read_text())
    assert summary["mean"] == s.mean


def test_csv_format(tmp_path):
    run("stats", "--config", CONFIGS / "small_signal.yaml", "--out", tmp_path, "--tag", "t")
    raw = (tmp_path / "stats_t.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    _, rows = io.read_csv(tmp_path / "stats_t.csv")
    value = next(r[1] for r in rows if float(r[1]) > 1e-4)
    assert float(value) == float(f"{float(value):.17g}") and len(value.replace(".", "").lstrip("0")) >= 15


def test_sweep_smoke_deterministic(tmp_path):
    cfg = write(tmp_path, SMOKE)
    bodies = []
    for k, threads in enumerate(["1", "2"]):
        out = tmp_path / f"run{k}"
        assert run("sweep", "--config", cfg, "--out", out, "--tag", "smoke", "--threads", threads) == 0
        bodies.append((out / "sweep_smoke.csv").read_bytes())
    assert bodies[0] == bodies[1]
    header, rows = io.read_csv(tmp_path / "run0" / "sweep_smoke.csv")
    assert header == ["axis1", "axis2", "mean_over_Na", "fano", "status"]
    assert len(rows) == 4
    assert [float(r[2]) for r in rows[:2]] == [0.0, 0.0]
    schema = json.loads((tmp_path / "run0" / "sweep_smoke_schema.json").read_text())
    assert schema == {"axis1": "theta", "axis2": "p_over_q", "scenario": "theta_vs_momentum"}


def test_manifest_lists_every_file(tmp_path):
    cfg = write(tmp_path, SMOKE)
    run("sweep", "--config", cfg, "--out", tmp_path / "o", "--tag", "a")
    run("design", "--config", CONFIGS / "reference_design.yaml", "--out", tmp_path / "o", "--tag", "b")
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    listed = {f["name"]: f["sha256"] for r in manifest["runs"] for f in r["files"]}
    on_disk = {p.name for p in (tmp_path / "o").iterdir() if p.name != "manifest.json"}
    assert set(listed) == on_disk
    for name, digest in listed.items():
        assert io.sha256(tmp_path / "o" / name) == digest
    assert manifest["tool"] == "qfelo" and manifest["version"]
    assert manifest["runs"][0]["config"]["resolved"]["Na"] == 150.0


def test_design_report(tmp_path):
    assert run("design", "--config", CONFIGS / "reference_design.yaml", "--out", tmp_path, "--tag", "t") == 0
    _, rows = io.read_csv(tmp_path / "design_t.csv")
    table = {r[0]: float(r[1]) for r in rows}
    assert table["gamma0"] == pytest.approx(51.8, rel=0.01)
    assert table["sigma_e"] == pytest.approx(0.68e-6, rel=0.03)
    assert table["n_out"] == pytest.approx(1e6, rel=0.1)
    _, verdicts = io.read_csv(tmp_path / "design_t_verdicts.csv")
    assert all(v[4] == "1" for v in verdicts)


def test_feasibility_grid(tmp_path):
    text = (CONFIGS / "reference_design.yaml").read_text().replace("num: 200", "num: 20")
    cfg = write(tmp_path, text)
    assert run("feasibility", "--config", cfg, "--out", tmp_path, "--tag", "t") == 0
    header, rows = io.read_csv(tmp_path / "feasibility_t.csv")
    assert header[:2] == ["sigma_e", "eps_n"] and header[-2:] == ["mask_bits", "feasible"]
    assert len(rows) == 400
    for r in rows:
        bits = [int(x) for x in r[2:8]]
        assert int(r[8]) == sum(b << i for i, b in enumerate(bits))
        assert int(r[9]) == int(all(bits))


def test_dynamics_trace(tmp_path):
    cfg = write(tmp_path, "theta: 1.0\nNa: 20\nalpha_at_Na: 0.1\n")
    assert run("dynamics", "--config", cfg, "--out", tmp_path, "--tag", "t") == 0
    header, rows = io.read_csv(tmp_path / "dynamics_t.csv")
    assert header == ["cycle", "tv_distance", "mean", "fano"]
    assert float(rows[-1][1]) < 1e-9


def test_classical_table(tmp_path):
    assert run("classical", "--config", CONFIGS / "small_signal.yaml", "--out", tmp_path, "--tag", "t") == 0
    summary = json.loads((tmp_path / "classical_t_summary.json").read_text())
    assert summary["fano_classical"] > summary["fano_quantum"] > 1
    header, _ = io.read_csv(tmp_path / "classical_t.csv")
    assert header == ["n", "P_quantum", "P_classical", "P_poisson"]


def test_env_default_output(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env_out"))
    assert run("sweep", "--config", write(tmp_path, SMOKE), "--tag", "e") == 0
    assert (tmp_path / "env_out" / "sweep_e.csv").exists()


def test_default_tag_is_timestamp(tmp_path):
    run("sweep", "--config", write(tmp_path, SMOKE), "--out", tmp_path / "o")
    names = [p.name for p in (tmp_path / "o").glob("sweep_*Z.csv")]
    assert len(names) == 1


@pytest.mark.parametrize("text", ["theta: [1\n", "theta: 1\nNa: -3\nwrT: 1\n", "Na: 150\nwrT: 1\n"])
def test_config_errors_exit_1(tmp_path, text, capsys):
    assert run("stats", "--config", write(tmp_path, text), "--out", tmp_path) == 1
    assert "config error" in capsys.readouterr().err


def test_missing_config_exit_1(tmp_path):
    assert run("stats", "--config", tmp_path / "absent.yaml", "--out", tmp_path) == 1


def test_bad_flags_exit_1(tmp_path):
    cfg = write(tmp_path, SMOKE)
    assert run("sweep", "--config", cfg, "--out", tmp_path, "--threads", "many") == 1
    with pytest.raises(SystemExit) as info:
        run("bogus", "--config", cfg)
    assert info.value.code == 1


def test_numerical_error_exit_2(tmp_path, capsys):
    text = (CONFIGS / "reference_design.yaml").read_text().replace("kpL_target: 0.145", "kpL_target: 0.3")
    assert run("design", "--config", write(tmp_path, text), "--out", tmp_path) == 2
    assert "numerical error" in capsys.readouterr().err


def test_io_error_exit_3(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run("sweep", "--config", write(tmp_path, SMOKE), "--out", blocker / "sub") == 3


def test_help_documents_exit_codes():
    out = subprocess.run([sys.executable, "-m", "qfelo.cli", "stats", "--help"],
                         capture_output=True, text=True, check=True).stdout
    for flag in ("--config", "--out", "--threads", "--tag", "--tolerance", "exit codes", "QFELO_OUT"):
        assert flag in out
