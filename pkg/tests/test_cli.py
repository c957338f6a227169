import json
import subprocess
import sys

from radarbandit.cli import _seeds, main

FAST = ["--horizon", "128"]


def write_cfg(tmp_path, **extra):
    doc = {"rdproc": {"num_pulses": 32}, **extra}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return str(p)


def test_seed_ranges():
    assert _seeds("0-3,7") == (0, 1, 2, 3, 7)


def test_run_writes_episode(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    rc = main(["run", "--config", cfg, "--scenario", "jammer", "--policy", "exp3", "--out", str(tmp_path), *FAST])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["horizon"] == 128 and summary["scenario"] == "jammer"
    assert (tmp_path / "jammer" / "exp3-dhat0.2" / "seed-0" / "pri.csv").exists()


def test_replay_roundtrip(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    main(["run", "--config", cfg, "--out", str(tmp_path), "--seeds", "3", *FAST])
    capsys.readouterr()
    rc = main(["replay", str(tmp_path / "coexistence" / "ts-dhat0.2" / "seed-3")])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["consistent"]


def test_dhat_none_label(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["run", "--config", cfg, "--dhat", "none", "--no-write", *FAST]) == 0
    assert json.loads(capsys.readouterr().out)["label"] == "ts"


def test_campaign_and_sweep(tmp_path, capsys):
    cfg = write_cfg(tmp_path, rdproc={"enabled": False}, tracker={"enabled": False})
    assert main(["campaign", "--config", cfg, "--seeds", "0-1", "--out", str(tmp_path), *FAST]) == 0
    agg = json.loads(capsys.readouterr().out)
    assert agg["average_cost"]["n"] == 2
    assert main(["sweep-dhat", "--config", cfg, "--values", "0.1,none", "--out", str(tmp_path), *FAST]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["d_hat"] for r in rows] == [0.1, None]
    assert (tmp_path / "coexistence" / "sweep-ts.csv").exists()


def test_config_error_exit_code(tmp_path, capsys):
    rc = main(["run", "--horizon", "0", "--no-write"])
    assert rc == 2
    err = json.loads(capsys.readouterr().err)
    assert err == {"error": "config", "field": "horizon", "message": "must be at least 1"}


def test_validate_config(tmp_path, capsys):
    good = write_cfg(tmp_path)
    assert main(["validate-config", good]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"tracker": {"mode": "x"}}))
    assert main(["validate-config", str(bad)]) == 2
    assert json.loads(capsys.readouterr().err)["field"] == "tracker.mode"


def test_replay_missing_directory(tmp_path, capsys):
    assert main(["replay", str(tmp_path / "nope")]) == 1
    assert "error" in json.loads(capsys.readouterr().err)


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path)
    proc = subprocess.run([sys.executable, "-m", "radarbandit.cli", "validate-config", cfg],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["valid"] is True
