import csv
import json
import subprocess
import sys

import pytest

from sympro.cli import build_parser, effective_config, main, resolve_settings
from sympro.errors import ConfigError
from sympro.experiments import DEFAULTS, EXPERIMENTS
from sympro.report import csv_text, fmt, svg_plot, verify_manifest


def cli(*args, env=None):
    return subprocess.run([sys.executable, "-m", "sympro.cli", *args], capture_output=True, text=True, env=env)


def write_config(tmp_path, cfg):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_help_lists_every_flag():
    out = cli("run", "--help").stdout
    for flag in ("--experiment", "--config", "--seed", "--jobs", "--out", "--check"):
        assert flag in out
    assert "check" in cli("--help").stdout


def test_unknown_flag_exits_nonzero():
    assert cli("run", "--bogus").returncode != 0
    assert cli("run", "--experiment", "nope").returncode != 0


def test_version():
    assert "sympro" in cli("--version").stdout


def test_list_prints_defaults(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for name in EXPERIMENTS:
        assert name in out
    assert "n_states = 32" in out


def test_unknown_config_field_is_named(tmp_path, capsys):
    cfg = write_config(tmp_path, {"experiment": "grid_null", "sede": 3})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "sede" in capsys.readouterr().err
    cfg = write_config(tmp_path, {"settings": {"grid_null": {"NN": [8]}}})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "settings.grid_null.NN" in capsys.readouterr().err


def test_invalid_json_config(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{'seed': 1,}")
    assert main(["run", "--config", str(p)]) == 1
    assert "invalid JSON" in capsys.readouterr().err


def test_flags_override_config_and_env_seed(tmp_path, monkeypatch):
    parser = build_parser()
    cfg = write_config(tmp_path, {"seed": 5, "jobs": 1, "out": "x"})
    eff = effective_config(parser.parse_args(["run", "--config", cfg, "--seed", "9"]))
    assert eff["seed"] == 9 and eff["jobs"] == 1 and eff["out"] == "x"
    monkeypatch.setenv("SYMPRO_SEED", "42")
    assert effective_config(parser.parse_args(["run"]))["seed"] == 42
    assert effective_config(parser.parse_args(["run", "--config", cfg]))["seed"] == 5
    monkeypatch.setenv("SYMPRO_SEED", "forty")
    with pytest.raises(ConfigError):
        effective_config(parser.parse_args(["run"]))


def test_resolve_settings_keeps_defaults():
    st = resolve_settings({"grid_null": {"N": [8]}})
    assert st["grid_null"]["N"] == [8]
    assert st["grid_null"]["n_states"] == DEFAULTS["grid_null"]["n_states"]
    assert DEFAULTS["grid_null"]["N"] == [16, 32, 64, 128]
    with pytest.raises(ConfigError, match="unknown experiment"):
        resolve_settings({"nope": {}})


def test_run_creates_out_dir_and_manifest(tmp_path, capsys):
    out = tmp_path / "deep" / "results"
    assert main(["run", "--experiment", "grid_null", "--out", str(out), "--jobs", "1", "--check"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert verify_manifest(out) == []
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["experiment"] == "grid_null"
    assert manifest["integrator"]
    assert {f["path"] for f in manifest["files"]} >= {"grid_null/grid_null.csv", "grid_null/summary.json"}
    rows = read_csv(out / "grid_null" / "grid_null.csv")
    assert set(rows[0]) == {"N", "operator", "offset", "error"}
    (out / "grid_null" / "grid_null.csv").write_text("tampered\n")
    assert verify_manifest(out) == ["grid_null/grid_null.csv"]


def test_grid_null_runs_are_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["run", "--experiment", "grid_null", "--seed", "3", "--jobs", "1", "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "a" / "grid_null" / "grid_null.csv").read_bytes()
    b = (tmp_path / "b" / "grid_null" / "grid_null.csv").read_bytes()
    assert a == b


def test_parallel_jobs_match_serial(tmp_path):
    cfg = write_config(tmp_path, {"settings": {"pathint": {"seeds": 2, "batch": 2, "horizons": [32]}}})
    for d, jobs in (("s", "1"), ("p", "2")):
        assert main(["run", "--experiment", "pathint", "--config", cfg, "--jobs", jobs, "--out", str(tmp_path / d)]) == 0
    for stem in ("runs", "cells", "separations"):
        assert (tmp_path / "s" / "pathint" / f"{stem}.csv").read_bytes() == \
            (tmp_path / "p" / "pathint" / f"{stem}.csv").read_bytes()


def test_dimension_law_counts_through_cli(tmp_path):
    cfg = write_config(tmp_path, {"settings": {"dimension_law": {
        "systems": [{"system": "torus", "q": 2}, {"system": "sphere", "n": 3}], "T": 60.0}}})
    out = tmp_path / "o"
    assert main(["run", "--experiment", "dimension_law", "--seed", "7", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out / "dimension_law" / "counts.csv")
    assert [r["q_expected"] for r in rows] == ["2", "2"]
    assert all(r["q_observed"] == r["q_expected"] for r in rows)
    spectra = read_csv(out / "dimension_law" / "spectra.csv")
    assert len(spectra) == 4 + 3


def test_failed_check_exits_two(tmp_path, capsys):
    cfg = write_config(tmp_path, {"settings": {"dimension_law": {
        "systems": [{"system": "torus", "q": 1}], "T": 40.0, "tol": 1e-12}}})
    assert main(["run", "--experiment", "dimension_law", "--config", cfg, "--out", str(tmp_path), "--check"]) == 2
    assert "FAIL" in capsys.readouterr().out


def test_fmt_and_csv_text():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(True) == "1" and fmt(3) == "3" and fmt(None) == ""
    assert float(fmt(1 / 3)) == 1 / 3
    text = csv_text([{"a": 1.5, "b": "x"}, {"a": float("nan")}], ["a", "b"])
    assert text == "a,b\n1.5,x\nnan,\n"


def test_svg_plot_is_wellformed():
    import xml.etree.ElementTree as ET
    svg = svg_plot([("s", [1, 2, 3], [1.0, 0.5, 0.25], "line"), ("b", [1, 2], [1, 2], "bars")],
                   title="t < u", logy=True)
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert "t &lt; u" in svg
    ET.fromstring(svg_plot([], title="empty"))
