import json
import subprocess
import sys

import pytest

from roughdrift.cli import main
from roughdrift.experiments import EXPERIMENTS, config_hash, resolve_config
from roughdrift.errors import ConfigError


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def test_list_has_seven_rows(capsys):
    assert main(["list"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 8
    assert main(["list", "--json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["name"] for r in rows] == list(EXPERIMENTS) and len(rows) == 7
    assert all({"required_keys", "runtime"} <= set(r) for r in rows)


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["list", "--bogus"])
    assert exc.value.code == 2


def test_pde_smoke_run(tmp_path, capsys):
    cfg = write(tmp_path, "pde_smoke.json", {"experiment": "pde", "case": "heat_flow", "terminal": "x"})
    out = tmp_path / "out"
    assert main(["run", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == 1 and summary["experiment"] == "pde"
    assert summary["results"]["max_error"] <= 1e-6
    assert summary["passed"] and (out / "residuals.csv").exists()
    assert len(summary["config_hash"]) == 16


def test_malformed_json_exits_2(tmp_path):
    assert main(["run", write(tmp_path, "bad.json", "{nope")]) == 2


def test_invalid_configs_exit_2(tmp_path):
    cases = [
        {"experiment": "nope"},
        {"experiment": "pde"},
        {"experiment": "pde", "case": "smooth", "extra": 1},
        {"experiment": "holder", "n_points": "many"},
        {"experiment": "holder", "seed": -1},
        {"experiment": "sde", "checkpoints": [0.5, 2.0]},
        {"experiment": "sde", "n_paths": 0},
    ]
    for i, c in enumerate(cases):
        assert main(["run", write(tmp_path, f"c{i}.json", c), "--out", str(tmp_path / "o")]) == 2, c


def test_experiment_subcommand_and_mismatch(tmp_path):
    cfg = write(tmp_path, "h.json", {"experiment": "holder"})
    assert main(["holder", "--config", cfg, "--out", str(tmp_path / "h")]) == 0
    assert main(["lift", "--config", cfg, "--out", str(tmp_path / "x")]) == 2


def test_gate_failure_exits_1(tmp_path, capsys):
    cfg = write(tmp_path, "h.json", {"experiment": "holder", "band": [0.9, 1.0]})
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "exponent_in_band" in capsys.readouterr().err
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["passed"] is False


def test_seed_flag_overrides_config(tmp_path):
    cfg = write(tmp_path, "h.json", {"experiment": "holder", "seed": 3})
    main(["run", cfg, "--out", str(tmp_path / "a"), "--seed", "5"])
    assert json.loads((tmp_path / "a" / "summary.json").read_text())["seed"] == 5


def test_same_seed_byte_identical_csv(tmp_path, monkeypatch):
    cfg = write(tmp_path, "y.json", {"experiment": "young", "n_reps": 500, "reduce_pairs": 50})
    main(["run", cfg, "--out", str(tmp_path / "a")])
    monkeypatch.setenv("ROUGHDRIFT_THREADS", "2")
    main(["run", cfg, "--out", str(tmp_path / "b")])
    for name in ("ladder.csv", "reduction.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    main(["run", cfg, "--out", str(tmp_path / "c"), "--seed", "1"])
    assert (tmp_path / "a" / "ladder.csv").read_bytes() != (tmp_path / "c" / "ladder.csv").read_bytes()


def test_config_hash_canonical():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_resolve_defaults():
    name, cfg, seed = resolve_config({"experiment": "kpz"})
    assert name == "kpz" and seed == 0 and cfg["level"] == 32
    with pytest.raises(ConfigError):
        resolve_config([1, 2])


def test_console_script_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "roughdrift.cli", "list", "--json"], capture_output=True, text=True)
    assert r.returncode == 0 and len(json.loads(r.stdout)) == 7
    r = subprocess.run([sys.executable, "-m", "roughdrift.cli", "holder", "--frobnicate"], capture_output=True)
    assert r.returncode == 2
