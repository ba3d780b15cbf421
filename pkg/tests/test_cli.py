import json
from pathlib import Path

import pytest

from artifact.cli import main
from artifact.config import load_config, sweep_config
from artifact.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_shipped_configs_parse():
    cfg = sweep_config(load_config(CONFIGS / "sweep.cfg"))
    assert cfg.eps == (0.05, 0.1, 0.2, 0.4) and cfg.resolutions == (64, 128) and cfg.full_q_eps == 0.2
    assert sweep_config(load_config(CONFIGS / "quick_sweep.cfg")).full_q_eps is None


def test_unknown_key_and_section(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[sweep]\nepsilon = 0.1\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("[solver]\nx = 1\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("[sweep]\neps = 0.1, 0.1, 0.2\n")
    with pytest.raises(ConfigError):
        sweep_config(load_config(bad))


def test_usage_errors_exit_nonzero(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["transport-table", "--bogus"])
    assert e.value.code == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("[kinetic]\neps = zero\n")
    assert main(["kinetic-run", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["sweep", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_numerical_failure_writes_report(tmp_path, capsys):
    cfg = tmp_path / "k.cfg"
    # a thermal bump far outside the velocity box makes the moments degenerate
    cfg.write_text("[kinetic]\neps = 0.1\nT = 0.01\nnx = 8\nkappa0 = 1000\nn_outputs = 1\n[velocity]\nn = 8\nvmax = 4\n")
    code = main(["kinetic-run", "--config", str(cfg), "--out", str(tmp_path / "run")])
    assert code == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "error" in err and "message" in err


def test_transport_table_output(capsys):
    assert main(["transport-table", "--theta", "0.81,1.0,1.21", "--method", "sonine", "--order", "3"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("theta,mu,kappa")
    rows = [list(map(float, l.split(",")[:3])) for l in lines[1:]]
    assert len(rows) == 3 and all(r[1] > 0 and r[2] > 0 for r in rows)


def test_cns_run_outputs(tmp_path):
    assert main(["cns-run", "--config", str(CONFIGS / "cns.cfg"), "--out", str(tmp_path)]) == 0
    summary = json.load(open(tmp_path / "summary.json"))
    assert summary["transport"] == "bgk/closed-form"
    assert (tmp_path / "trajectory.csv").exists() and (tmp_path / "plot_energy.dat").exists()


def test_kinetic_run_outputs(tmp_path):
    cfg = tmp_path / "k.cfg"
    cfg.write_text("[kinetic]\neps = 0.1\nT = 0.05\nnx = 8\nn_outputs = 2\n[velocity]\nn = 8\nvmax = 6\n")
    out = tmp_path / "run"
    assert main(["kinetic-run", "--config", str(cfg), "--out", str(out), "--dump-f"]) == 0
    assert (out / "F_final.npy").exists() and (out / "moments.csv").exists()
    assert json.load(open(out / "summary.json"))["mass_drift"] < 1e-13
    assert main(["kinetic-run", "--config", str(cfg), "--out", str(out), "--dump-f", "--max-dump-mb", "0"]) == 2


def test_quick_sweep_end_to_end(tmp_path):
    out = tmp_path / "report.json"
    assert main(["sweep", "--config", str(CONFIGS / "quick_sweep.cfg"), "--out", str(out)]) == 0
    rep = json.load(open(out))
    assert rep["complete"] and rep["slopes"]["16"]["L2"]["slope"] > 0


def test_check_and_schema(capsys):
    assert main(["check"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 10
    assert main(["schema"]) == 0
    assert "[sweep]" in capsys.readouterr().out


def test_coercivity_command(tmp_path):
    out = tmp_path / "coercivity.json"
    assert main(["coercivity", "--backend", "bgk", "--nv", "8", "--vmax", "6", "--out", str(out)]) == 0
    rep = json.load(open(out))
    # the BGK operator is nu (I - P0): every non-kernel Rayleigh quotient equals one
    assert abs(rep["delta0"] - 1.0) < 1e-10
    assert max(abs(q) for q in rep["kernel_rayleigh_quotients"]) < 1e-12
