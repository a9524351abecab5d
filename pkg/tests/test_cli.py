import csv
import json
from pathlib import Path


from disco.cli import SWEEP_COLUMNS, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_missing_config_exits_2(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert run_cli("run", missing, "--out", tmp_path) == 2
    assert str(missing) in capsys.readouterr().err


def test_bogus_strategy_lists_presets(tmp_path, capsys):
    assert run_cli("run", CONFIGS / "default.json", "--strategy", "bogus", "--out", tmp_path) == 2
    err = capsys.readouterr().err
    assert "holistic" in err and "no_sleep" in err


def test_invalid_config_reports_paths(tmp_path, capsys):
    assert run_cli("run", CONFIGS / "default.json", "--set", "lyapunov.alphas=[0.5,0.6,0.1]",
                   "--out", tmp_path) == 2
    assert "lyapunov.alphas" in capsys.readouterr().err


def test_run_writes_csv_json_and_manifest(tmp_path):
    out = tmp_path / "run"
    assert run_cli("run", CONFIGS / "default.json", "--slots", 1000, "--seed", 3, "--out", out) == 0
    csvs = list(out.glob("*_holistic_s3-0.csv"))
    assert len(csvs) == 1
    assert len(csvs[0].read_text().splitlines()) == 1001
    agg = json.loads(csvs[0].with_suffix(".json").read_text())
    assert agg["slots"] == 1000 and agg["strategy"] == "holistic"
    manifest = [json.loads(line) for line in (out / "manifest.jsonl").read_text().splitlines()]
    assert manifest[0]["command"] == "run" and manifest[0]["seed"] == 3


def test_rerun_is_byte_identical(tmp_path):
    for sub in ("a", "b"):
        assert run_cli("run", CONFIGS / "default.json", "--slots", 200, "--out", tmp_path / sub) == 0
    (a,), (b,) = (list((tmp_path / s).glob("*.csv")) for s in ("a", "b"))
    assert a.read_bytes() == b.read_bytes()


def test_env_seed_overrides_flag(tmp_path, monkeypatch):
    monkeypatch.setenv("DISCO_SEED", "17")
    assert run_cli("run", CONFIGS / "default.json", "--slots", 50, "--seed", 3, "--out", tmp_path) == 0
    assert list(tmp_path.glob("*_s17-0.csv")) and not list(tmp_path.glob("*_s3-0.csv"))


def test_sweep_counts_and_schema(tmp_path):
    out = tmp_path / "sweep"
    rc = run_cli("sweep", CONFIGS / "default.json", "--param", "V=1e4,1e5,1e6", "--strategies",
                 "holistic,no_sleep", "--realizations", 2, "--slots", 100, "--out", out)
    assert rc == 0
    assert len(list((out / "episodes").glob("*.csv"))) == 12
    with open(out / "sweep_V.csv", newline="") as fh:
        reader = csv.DictReader(fh)
        assert tuple(reader.fieldnames) == SWEEP_COLUMNS
        rows = list(reader)
    assert len(rows) == 6 and {r["strategy"] for r in rows} == {"holistic", "no_sleep"}
    assert all(r["n"] == "2" for r in rows)


def test_single_value_sweep_equals_run(tmp_path):
    cfg = CONFIGS / "tradeoff.json"  # has a randomization block
    assert run_cli("sweep", cfg, "--param", "V=5e6", "--slots", 150, "--seed", 4, "--out", tmp_path / "s") == 0
    assert run_cli("run", cfg, "--set", "lyapunov.v=5e6", "--slots", 150, "--seed", 4, "--out", tmp_path / "r") == 0
    (ran,) = (tmp_path / "r").glob("*.csv")
    (swept,) = (tmp_path / "s" / "episodes").glob("*.csv")
    assert ran.name == swept.name
    assert ran.read_bytes() == swept.read_bytes()


def test_sweep_usage_errors(tmp_path):
    assert run_cli("sweep", CONFIGS / "default.json", "--param", "V=", "--out", tmp_path) == 2
    assert run_cli("sweep", CONFIGS / "default.json", "--param", "gamma=1,2", "--out", tmp_path) == 2


def test_templates_load(tmp_path, capsys):
    for name in ("tradeoff", "reliability", "comparison", "arrival_load"):
        assert run_cli("config", name) == 0
        data = json.loads(capsys.readouterr().out)
        assert "ues" in data
    assert run_cli("config", "nope") == 2


def test_verify_quick_oracle(capsys):
    assert run_cli("verify", "--suite", "oracle", "--quick") == 0
    assert "[PASS]" in capsys.readouterr().out
