"""Config resolution, scenario runs, artifact determinism, exit codes."""

import json
import os
import shutil

import numpy as np
import pytest

from thinslab import cli, harness
from thinslab.harness import (
    ConfigError, ExperimentConfig, config_echo, get_scenario, list_scenarios,
    parse_config_file, resolve_config, write_junit,
)


def test_scenario_registry():
    assert get_scenario("translation").kind == "evolution"
    assert get_scenario("oneway-lens").kind == "oneway"
    with pytest.raises(ConfigError):
        get_scenario("nope")


def test_list_scenarios_deterministic():
    a = list_scenarios()
    b = list_scenarios()
    assert a == b
    assert a.splitlines()[2].startswith("translation")
    for name in ("varspeed", "hoelder-z", "oneway-lens"):
        assert name in a


def test_parse_config_file(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("# comment\nn_points = 64\n\nNs = 8,16   # inline\nvariant=averaged\n")
    got = parse_config_file(p)
    assert got == {"n_points": "64", "Ns": "8,16", "variant": "averaged"}
    bad = tmp_path / "bad.cfg"
    bad.write_text("just words\n")
    with pytest.raises(ConfigError):
        parse_config_file(bad)
    with pytest.raises(ConfigError):
        parse_config_file(tmp_path / "missing.cfg")


def test_resolve_config_precedence(tmp_path):
    file_map = {"n_points": "64", "Ns": "1,4", "s": "2.0"}
    overrides = {"Ns": "1,8"}
    cfg = resolve_config("translation", file_map, overrides)
    assert cfg.n_points == 64          # from file
    assert cfg.Ns == (1, 8)            # flag wins over file
    assert cfg.s == 2.0
    assert cfg.variant == "averaged"   # scenario default survives
    assert cfg.delta_max == 1.0


def test_resolve_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        resolve_config("translation", {"n_points": "many"}, {})
    with pytest.raises(ConfigError):
        resolve_config("translation", {"mystery_key": "1"}, {})
    with pytest.raises(ConfigError):
        resolve_config("translation", {"Ns": "8,8"}, {})
    with pytest.raises(ConfigError):
        resolve_config("translation", {"variant": "peculiar"}, {})


def test_config_echo_round_trips_types():
    cfg = resolve_config("varspeed", {}, {})
    echo = config_echo(cfg)
    assert echo["Ns"] == [8, 16, 32, 64, 128]
    assert isinstance(echo["period"], float)
    assert echo["scenario"] == "varspeed"


def test_write_junit(tmp_path):
    p = tmp_path / "props.xml"
    write_junit(p, "suite", [("ok-case", True, ""), ("bad-case", False, "broke")])
    text = p.read_text()
    assert 'tests="2"' in text
    assert 'failures="1"' in text
    assert 'name="bad-case"' in text
    assert "broke" in text
    assert "timestamp" not in text and "time=" not in text


def _run_tiny_translation(out_dir):
    cfg = resolve_config("translation", {}, {
        "n_points": "64", "Ns": "1,8", "norm_points": "64",
        "output_dir": str(out_dir)})
    return harness.run(cfg), cfg


def test_run_translation_artifacts(tmp_path):
    code, cfg = _run_tiny_translation(tmp_path / "out")
    assert code == harness.EXIT_OK
    out = tmp_path / "out"
    for name in ("convergence.csv", "convergence.json", "norm_sweep.csv",
                 "properties.xml", "manifest.json"):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert manifest["error"] is None
    assert manifest["scenario"] == "translation"
    assert "total" in manifest["timings"]
    assert "convergence.csv" in manifest["outputs"]
    sweep = (out / "norm_sweep.csv").read_text().strip().splitlines()
    assert sweep[0] == "s,delta,norm_hs,excess_rate"
    assert len(sweep) == 1 + 2 * 6      # two s values, six thicknesses


def test_rerun_is_byte_identical(tmp_path):
    out = tmp_path / "out"
    _run_tiny_translation(out)
    keep = {}
    for name in ("convergence.csv", "convergence.json", "norm_sweep.csv",
                 "properties.xml"):
        keep[name] = (out / name).read_bytes()
    _run_tiny_translation(out)
    for name, blob in keep.items():
        assert (out / name).read_bytes() == blob, name


def test_run_oneway_artifacts(tmp_path):
    cfg = resolve_config("oneway-homogeneous", {}, {
        "n_points": "128", "n_slabs": "8", "snapshot_every": "4",
        "output_dir": str(tmp_path / "ow")})
    code = harness.run(cfg)
    assert code == harness.EXIT_OK
    out = tmp_path / "ow"
    assert (out / "phase_errors.csv").exists()
    assert (out / "energy_partition.csv").exists()
    assert (out / "snapshot_0000.tslb").exists()
    assert (out / "snapshot_0008.tslb").exists()
    rows = (out / "energy_partition.csv").read_text().strip().splitlines()
    assert rows[0].startswith("depth,")
    assert len(rows) == 1 + 1 + 8       # header, initial, one per slab


def test_manifest_written_on_failure(tmp_path):
    # impossible reference for an x-dependent symbol: config error, manifest kept
    cfg = resolve_config("varspeed", {}, {
        "n_points": "64", "Ns": "8,16", "reference": "exact",
        "output_dir": str(tmp_path / "fail")})
    code = harness.run(cfg)
    assert code == harness.EXIT_CONFIG
    manifest = json.loads((tmp_path / "fail" / "manifest.json").read_text())
    assert manifest["status"] == "config-error"
    assert manifest["error"]


def test_gate_violation_exit_code(tmp_path):
    # translation demands exactness; a frozen run on a z-dependent symbol
    # stays exact, so force failure via an absurd slope gate instead:
    # run hoelder-z at tiny resolution where the averaged-beats-frozen
    # margin cannot hold at N where both are exact. Simpler: patch gates.
    entry = get_scenario("translation")
    patched = harness.Scenario(
        name=entry.name, kind=entry.kind, description=entry.description,
        regularity=entry.regularity, defaults=entry.defaults,
        gates={"exact_tol": 1e-18})
    old = harness._SCENARIOS["translation"]
    harness._SCENARIOS["translation"] = patched
    try:
        code, _ = _run_tiny_translation(tmp_path / "gate")
    finally:
        harness._SCENARIOS["translation"] = old
    assert code == harness.EXIT_GATE
    manifest = json.loads((tmp_path / "gate" / "manifest.json").read_text())
    assert manifest["status"] == "gate-violation"


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    assert "translation" in out
    assert cli.main(["run", "--scenario", "nope",
                     "--output-dir", str(tmp_path / "x")]) == 2
    code = cli.main(["run", "--scenario", "translation",
                     "--grid-points", "64", "--Ns", "1,8",
                     "--set", "norm_points=64",
                     "--output-dir", str(tmp_path / "cli-out")])
    assert code == 0
    assert (tmp_path / "cli-out" / "manifest.json").exists()


def test_cli_bad_set_pair(tmp_path):
    assert cli.main(["run", "--scenario", "translation",
                     "--set", "oops", "--output-dir", str(tmp_path)]) == 2


def test_quick_check(tmp_path):
    code = harness.quick_check(str(tmp_path / "chk"))
    assert code == 0
    assert (tmp_path / "chk" / "properties.xml").exists()
    manifest = json.loads((tmp_path / "chk" / "manifest.json").read_text())
    assert manifest["status"] == "ok"
