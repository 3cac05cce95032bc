import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from qdyn1d import cli
from qdyn1d.tracemap import gap_edge_energies

PD = {"family": "substitution", "params": {"rule": "period_doubling"}, "a": 0.0, "b": 1.0}


def run_main(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def write_config(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_tracemap_gap_edges(capsys):
    code, out, _ = run_main(["tracemap", "--m", "3", "--lambda", "1", "--R", "1"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 8
    E = [float(r["E_mk"]) for r in rows]
    assert E == list(gap_edge_energies(3, 1.0, 1.0).energies)
    assert all(abs(float(r["x_m_plus_1"]) + 2) < 1e-6 for r in rows)


def test_transfer_scan_config(tmp_path, capsys):
    cfg = {"experiment": "transfer-scan", "potential": PD, "energies": [0.0, 0.5, 1.0],
           "n_max": 4096, "workers": 2}
    code, out, _ = run_main(["transfer-scan", "--config", write_config(tmp_path, cfg)], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["E"] for r in rows] == ["0.0", "0.5", "1.0"]
    assert abs(float(rows[0]["alpha_hat"]) - 1.0) < 0.1


def test_transfer_scan_special_energies(capsys):
    code, out, _ = run_main(["transfer-scan", "--set", f"potential={json.dumps(PD)}",
                             "--special", "--n-max", "1024"], capsys)
    assert code == 0 and out.splitlines()[1].startswith("0.0,")


def test_config_errors_point_at_key(tmp_path, capsys):
    cfg = {"experiment": "transfer-scan", "potential": PD, "energies": [0.0], "n_maxx": 5}
    code, _, err = run_main(["transfer-scan", "--config", write_config(tmp_path, cfg)], capsys)
    assert code == 2 and json.loads(err)["key"] == "n_maxx"

    cfg = {"experiment": "transfer-scan", "potential": {**PD, "a": "zero"}, "energies": [0.0]}
    code, _, err = run_main(["transfer-scan", "--config", write_config(tmp_path, cfg)], capsys)
    assert code == 2 and json.loads(err)["key"] == "potential.a"

    code, _, err = run_main(["tracemap"], capsys)
    assert code == 2 and json.loads(err)["key"] == "m"

    code, _, err = run_main(["tracemap", "--config", str(tmp_path / "missing.json")], capsys)
    assert code == 2 and json.loads(err)["key"] == "config"


def test_flags_override_config(tmp_path):
    args = cli.make_parser().parse_args(
        ["tracemap", "--config", write_config(tmp_path, {"m": 1, "R": 2.0}), "--R", "3",
         "--set", "extra_levels=2"])
    cfg = cli.build_config("tracemap", args)
    assert cfg["m"] == 1 and cfg["R"] == 3.0 and cfg["extra_levels"] == 2


def test_module_error_exit_1(capsys):
    code, _, err = run_main(["sturmian", "--omega", "0.25"], capsys)
    assert code == 1 and json.loads(err)["type"] == "RationalInput"


def test_artifacts_and_determinism(tmp_path, capsys):
    cfg = {"experiment": "dynamics", "potential": PD, "L": 300, "seed": 7,
           "T": {"start": 2, "stop": 12, "num": 5}, "p": [2, 4], "alpha": 1.0, "E0": 0.0,
           "theorem": "period_doubling"}
    path = write_config(tmp_path, cfg)
    for name in ("a", "b"):
        assert cli.main(["dynamics", "--config", path, "--out", str(tmp_path / name)]) == 0
    for art in ("moments.csv", "harness.csv", "summary.json"):
        assert (tmp_path / "a" / art).read_bytes() == (tmp_path / "b" / art).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["config"]["L"] == 300 and manifest["status"] == 0
    assert "moments.csv" in manifest["artifacts"] and "numpy" in manifest["versions"]
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["predicted_beta"]["4"] == -0.5
    text = (tmp_path / "a" / "moments.csv").read_text()
    assert "\r" not in text and text.startswith("T,p,moment,P_T,beta_running,valid\n")


def test_perturb_run(capsys):
    code, out, _ = run_main(["perturb", "--set", f"potential={json.dumps(PD)}", "--E0", "0",
                             "--n-max", "2048", "--C2", "1", "--decay", "4"], capsys)
    assert code == 0 and out.startswith("n,R,U,theta,residual\n")


def test_sturmian_run(tmp_path):
    assert cli.main(["sturmian", "--omega", "golden", "--depth", "30", "--length", "50",
                     "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["d_hat"] == 1.0 and summary["c_lambda"] == 5.0
    rows = (tmp_path / "cfrac.csv").read_text().splitlines()
    assert rows[1] == "1,1,1,1" and rows[5] == "5,1,5,8"


def test_structure_check_exit_codes(capsys):
    args = ["structure-check", "--set", f"potential={json.dumps(PD)}", "--length", "2000"]
    code, out, _ = run_main(args + ["--condition", "S1"], capsys)
    assert code == 0 and json.loads(out)["holds"]
    code, out, _ = run_main(args + ["--condition", "S3"], capsys)
    assert code == 1 and json.loads(out)["first_violation"] is not None


def test_threads_env(monkeypatch):
    monkeypatch.setenv("QDYN1D_THREADS", "1")
    assert cli.worker_count({"workers": 8}) == 1
    monkeypatch.setenv("QDYN1D_THREADS", "many")
    with pytest.raises(cli.ConfigError):
        cli.worker_count({})


def test_scan_is_thread_count_independent(tmp_path, monkeypatch, capsys):
    cfg = {"experiment": "transfer-scan", "potential": PD, "n_max": 2048,
           "energies": {"start": -1.0, "stop": 2.0, "num": 9}}
    path = write_config(tmp_path, cfg)
    outs = []
    for n in ("1", "4"):
        monkeypatch.setenv("QDYN1D_THREADS", n)
        code, out, _ = run_main(["transfer-scan", "--config", path], capsys)
        outs.append(out)
    assert outs[0] == outs[1]


@pytest.mark.parametrize("suite", ["identities", "oracles"])
def test_verify_suites(suite, capsys):
    code, out, _ = run_main(["verify", suite], capsys)
    assert code == 0 and "FAIL" not in out


@pytest.mark.slow
def test_verify_bounds(capsys):
    code, out, _ = run_main(["verify", "bounds"], capsys)
    assert code == 0


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qdyn1d.cli", "tracemap", "--m", "1"],
                          capture_output=True, text=True, check=True)
    E = [float(line.split(",")[2]) for line in proc.stdout.splitlines()[1:]]
    assert np.allclose(E, [-1.0, 2.0])
