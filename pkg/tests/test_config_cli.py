import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from xpharq.cli import main
from xpharq.config import ExperimentConfig, load_config
from xpharq.exceptions import ConfigurationError

RAYLEIGH = {"snr": {"kind": "rayleigh", "avg_snr_db": 10.0}, "mi": {"kind": "gaussian"}}


def _write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def _read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_config_round_trip_is_idempotent():
    cfg = ExperimentConfig.from_dict({
        "experiment": "xp_sweep", "channel": RAYLEIGH, "snr_sweep": [0, 10, 20],
        "grids": {"k_max": 3, "rate_step": 0.5, "r1_max": 6.0, "rk_max": 4.0}, "seed": 4,
    })
    once = cfg.to_json()
    twice = ExperimentConfig.from_dict(json.loads(once)).to_json()
    assert once == twice
    assert ExperimentConfig.from_dict(json.loads(once)).config_hash() == cfg.config_hash()


@pytest.mark.parametrize("obj, field", [
    ({"experiment": "mi_curve", "bogus": 1}, "bogus"),
    ({"experiment": "mi_curve", "grids": {"step": 0.1}}, "grids.step"),
    ({"experiment": "mi_curve", "params": {"alpha": 1}}, "params.alpha"),
    ({"experiment": "mi_curve", "grids": {"rate_step": -1}}, "grids.rate_step"),
    ({"experiment": "mi_curve", "channel": RAYLEIGH, "snr_sweep": []}, "snr_sweep"),
    ({"experiment": "nope"}, "experiment"),
    ({"experiment": "simulate", "params": {"n_cycles": 10}}, "params.n_cycles"),
])
def test_invalid_configs_name_the_field(obj, field):
    with pytest.raises(ConfigurationError, match=f"'{field}'"):
        ExperimentConfig.from_dict(obj)


def test_json_syntax_error_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "experiment": "mi_curve",\n  "seed": ,\n}')
    with pytest.raises(ConfigurationError, match=r"bad.json:3:11"):
        load_config(str(path))


def test_exit_code_for_config_error(tmp_path, capsys):
    path = _write(tmp_path, {"channel": RAYLEIGH, "grids": {"k_max": 0}})
    assert main(["throughput", "ir", "--config", path]) == 2
    assert "grids.k_max" in capsys.readouterr().err


def test_exit_code_for_solver_error(tmp_path, capsys):
    cfg = {"channel": RAYLEIGH, "grids": {"k_max": "inf", "mi_step": 0.005}, "params": {"mode": "persistent"}}
    path = _write(tmp_path, cfg)
    # a state cap is not configurable, so provoke the resource error with a huge rate range
    cfg["grids"]["r_max"] = 200.0
    _write(tmp_path, cfg)
    assert main(["mdp", "solve", "--config", path]) == 3
    assert "solver error" in capsys.readouterr().err


def test_mi_curve_qam(tmp_path):
    path = _write(tmp_path, {"channel": {"snr": {"kind": "rayleigh", "avg_snr_db": 0.0},
                                         "mi": {"kind": "qam", "m": 16}},
                             "snr_sweep": list(range(-10, 31))})
    out = tmp_path / "mi.csv"
    assert main(["mi", "--config", path, "--out", str(out)]) == 0
    header, rows = _read_csv(out)
    assert header == ["snr_db", "snr_linear", "mi"]
    mi = np.array([float(r[2]) for r in rows])
    assert len(rows) == 41 and np.all(np.diff(mi) >= 0) and np.all(mi <= 4.0) and mi[-1] > 3.99
    meta = json.loads((tmp_path / "mi.csv.meta.json").read_text())
    assert meta["columns"] == header and len(meta["config_hash"]) == 64
    assert meta["software"]["package"] == "xpharq"


def test_xp_sweep_dominates_ir_sweep(tmp_path):
    base = {"channel": RAYLEIGH, "snr_sweep": [0, 5, 10, 20],
            "grids": {"k_max": 2, "rate_step": 0.25, "r1_max": 6.0, "rk_max": 4.0, "mi_step": 0.01}}
    path = _write(tmp_path, base)
    assert main(["optimize", "ir", "--config", path, "--out", str(tmp_path / "ir.csv")]) == 0
    assert main(["optimize", "xp", "--config", path, "--out", str(tmp_path / "xp.csv")]) == 0
    h_ir, ir = _read_csv(tmp_path / "ir.csv")
    h_xp, xp = _read_csv(tmp_path / "xp.csv")
    assert h_ir == h_xp
    col = h_ir.index("eta")
    eta_ir = np.array([float(r[col]) for r in ir])
    eta_xp = np.array([float(r[col]) for r in xp])
    assert np.all(eta_xp >= eta_ir - 1e-12)
    assert np.all(np.diff(eta_ir) >= 0) and np.all(np.diff(eta_xp) >= 0)


def test_simulate_byte_identical_across_threads(tmp_path):
    cfg = {"channel": RAYLEIGH, "snr_sweep": [5, 15], "grids": {"k_max": 3},
           "params": {"rates": [4.0, 1.0, 0.5], "n_cycles": 150_000}, "seed": 17}
    path = _write(tmp_path, cfg)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--config", path, "--out", str(a), "--threads", "1"]) == 0
    assert main(["simulate", "--config", path, "--out", str(b), "--threads", "4"]) == 0
    assert a.read_bytes() == b.read_bytes()
    res = json.loads((tmp_path / "a.simresult.json").read_text())
    assert [r["seed"] for r in res] == [17, 17]
    c = tmp_path / "c.csv"
    assert main(["simulate", "--config", path, "--out", str(c), "--seed", "18"]) == 0
    assert c.read_bytes() != a.read_bytes()


def test_mdp_solve_then_show(tmp_path, capsys):
    cfg = {"grids": {"k_max": 2, "r_max": 4.0}, "params": {"first_rate": 1.5}}
    path = _write(tmp_path, cfg)
    out = tmp_path / "mdp.csv"
    assert main(["mdp", "solve", "--config", path, "--out", str(out)]) == 0
    header, rows = _read_csv(out)
    assert float(rows[0][header.index("gain")]) == pytest.approx(1.3, abs=1e-8)
    policy = tmp_path / "mdp_policy.json"
    assert policy.exists()
    assert main(["policy", "show", str(policy)]) == 0
    text = capsys.readouterr().out
    assert "first_rate=1.5" in text and "k,rsig,isig,deficit,action" in text
    # the state reached after a failed first round plays 0.5
    assert "1,1.5,1.0,0.5,0.5" in text


def test_policy_show_rejects_garbage(tmp_path):
    bad = tmp_path / "p.json"
    bad.write_text("{}")
    assert main(["policy", "show", str(bad)]) == 2


def test_throughput_and_k2_and_heuristic(tmp_path):
    path = _write(tmp_path, {"grids": {"k_max": 2}, "params": {"rates": [1.5, 0.5]}})
    out = tmp_path / "t.csv"
    assert main(["throughput", "xp", "--config", path, "--out", str(out)]) == 0
    header, rows = _read_csv(out)
    assert float(rows[0][header.index("eta")]) == pytest.approx(1.3, abs=1e-12)
    path = _write(tmp_path, {"channel": RAYLEIGH, "params": {"r1": 2.0, "i1_step": 0.5}})
    assert main(["policy", "k2", "--config", path, "--out", str(out)]) == 0
    header, rows = _read_csv(out)
    assert len(rows) == 4
    assert all(abs(float(r[4]) - float(r[5])) < 1e-4 for r in rows)
    path = _write(tmp_path, {"channel": RAYLEIGH, "grids": {"k_max": "inf"}})
    assert main(["heuristic", "--config", path, "--out", str(out)]) == 0
    header, rows = _read_csv(out)
    assert float(rows[0][header.index("eta")]) <= float(rows[0][header.index("capacity")])


def test_missing_config_is_a_config_error(capsys):
    assert main(["mi"]) == 2


def test_console_script_runs(tmp_path):
    path = _write(tmp_path, {"channel": RAYLEIGH, "grids": {"k_max": 2}, "params": {"r": 3.0}})
    proc = subprocess.run([sys.executable, "-m", "xpharq.cli", "throughput", "ir", "--config", path],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0].startswith("snr_db,snr_linear,k_max,r1,r2,eta")
