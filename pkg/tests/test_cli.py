"""Command-line driver: exit codes, validation of configs, artifacts and manifests."""
from __future__ import annotations

import json
import os
import subprocess
import sys

import numpy as np
import pytest
import yaml

from reflectmv.cli import ConfigError, main, run
from reflectmv.io import read_snapshots_binary, read_snapshots_csv, sha256_file


def _write(tmp_path, cfg, name="run.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def _sim_cfg(**params):
    base = {"dt": 1e-2, "T": 0.5, "epsilon": 1.0, "N": 64}
    base.update(params)
    return {"seed": 7, "model": "ou-cubic-1d", "params": base}


def test_simulate_writes_artifacts_and_manifest(tmp_path):
    out = tmp_path / "o"
    code = main(["simulate", "--config", _write(tmp_path, _sim_cfg()), "--out", str(out), "--workers", "1"])
    assert code == 0
    names = set(os.listdir(out))
    assert {"snapshots.csv", "moments.csv", "summary.json", "manifest.json"} <= names
    man = json.loads((out / "manifest.json").read_text())
    for name, digest in man["outputs"].items():
        assert sha256_file(out / name) == digest
    assert man["config"]["seed"] == 7
    assert man["domain_audit"]["exterior_states"] == 0
    snaps = read_snapshots_csv(out / "snapshots.csv")
    assert len(snaps) == 11 and snaps[0][2].shape == (64, 1)


def test_simulate_binary_snapshots(tmp_path):
    out = tmp_path / "b"
    run("simulate", _sim_cfg(snapshot_format="binary", snapshot_times=[0.0, 0.5]), out=str(out), workers=1)
    snaps = read_snapshots_binary(out / "snapshots.bin")
    assert [s[0] for s in snaps] == pytest.approx([0.0, 0.5])


def test_outputs_do_not_depend_on_workers(tmp_path):
    digests = []
    for w in (1, 4):
        man = run("simulate", _sim_cfg(), out=str(tmp_path / f"w{w}"), workers=w)
        digests.append(man["outputs"])
    assert digests[0] == digests[1]


def test_seed_override_and_requirement(tmp_path):
    cfg = _sim_cfg()
    del cfg["seed"]
    assert main(["simulate", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "x")]) == 2
    assert main(["simulate", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "x"), "--seed", "3",
                 "--workers", "1"]) == 0
    man = json.loads((tmp_path / "x" / "manifest.json").read_text())
    assert man["config"]["seed"] == 3


@pytest.mark.parametrize(
    "cfg",
    [
        {"seed": 1, "bogus": 1},
        {"seed": 1, "params": {"dtt": 0.1}},
        {"seed": -1},
        {"seed": 2**64},
        {"seed": "abc"},
        {"seed": 1, "params": {"dt": -1.0}},
        {"seed": 1, "params": {"epsilon": -0.5}},
        {"seed": 1, "model": "no-such-model"},
        {"seed": 1, "command": "poc"},
        {"seed": 1, "domain": {"kind": "box", "params": {"lo": [0.0, 0.0], "hi": [1.0, 1.0]}}},
        {"seed": 1, "params": {"snapshot_format": "xml"}},
    ],
)
def test_invalid_configs_exit_with_code_2(tmp_path, cfg):
    assert main(["simulate", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2


def test_missing_output_dir_and_bad_yaml(tmp_path):
    assert main(["simulate", "--config", _write(tmp_path, {"seed": 1})]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("seed: [1,\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path / "o")]) == 2
    assert main(["frobnicate"]) == 2


def test_runtime_failure_exits_with_code_1(tmp_path):
    cfg = {"seed": 1, "params": {"dt": 1e-2, "M": 64, "tol": 1e-15, "max_iter": 1}}
    assert main(["meanfield", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o"), "--workers", "1"]) == 1


def test_validate_reports_without_failing(tmp_path):
    out = tmp_path / "v"
    cfg = {"seed": 0, "model": {"dimension": 1, "b": ["-2*(x1 - 1)"], "f": ["x1**3"], "L": 2, "C": 1, "r": 3,
                                "x0": [0.5], "domain": {"kind": "box", "params": {"lo": [-2], "hi": [4]}}},
           "params": {"n_probes": 500}}
    assert main(["validate", "--config", _write(tmp_path, cfg), "--out", str(out), "--workers", "1"]) == 0
    rep = json.loads((out / "assumptions.json").read_text())
    text = json.dumps(rep)
    # x^3 with C = 1 breaks the local Lipschitz bound; validate reports it and still exits 0
    assert "VIOLATED" in text and "f_local_lipschitz" in text


def test_meanfield_command(tmp_path):
    out = tmp_path / "m"
    cfg = {"seed": 2, "params": {"dt": 1e-2, "M": 256, "tol": 5e-2, "snapshot_times": [0.0, 1.0]}}
    run("meanfield", cfg, out=str(out), workers=1)
    hist = (out / "fixed_point_history.csv").read_text().splitlines()
    assert hist[0] == "iteration,distance" and len(hist) >= 2
    snaps = read_snapshots_csv(out / "fixed_point_snapshots.csv")
    assert len(snaps) == 2 and snaps[0][2].shape == (256, 1)
    assert json.loads((out / "fixed_point.json").read_text())["converged"] is True


def test_ldp_command(tmp_path):
    out = tmp_path / "l"
    cfg = {"seed": 3, "params": {"dt": 1 / 256, "eps_list": [0.2, 0.1], "paths": 128, "n_list": [4, 16],
                                 "control": {"type": "expression", "expressions": ["4*t*(1 - t)"]}}}
    run("ldp", cfg, out=str(out), workers=1)
    summary = json.loads((out / "ldp.json").read_text())
    gaps = dict(summary["euler_gaps"])
    assert gaps[16] < gaps[4]
    lines = (out / "psi.csv").read_text().splitlines()
    assert lines[0] == "t,x1,k_abs" and len(lines) == 258
    cfg["params"]["control"] = {"type": "linear", "slope": [2.0]}
    run("ldp", cfg, out=str(out), workers=1)
    assert json.loads((out / "ldp.json").read_text())["action"] == pytest.approx(2.0)
    for bad in ({"type": "spline"}, {"type": "expression", "expressions": ["sin(t)"]}, {"type": "linear"}):
        cfg["params"]["control"] = bad
        with pytest.raises(ConfigError):
            run("ldp", cfg, out=str(out), workers=1)


def test_exit_command(tmp_path):
    out = tmp_path / "e"
    cfg = {"seed": 4, "scenario": "ou-cubic-1d-exit",
           "params": {"dt": 2e-3, "eps_list": [1.0, 0.8, 0.6], "paths": 32, "t_cap": 200.0}}
    run("exit", cfg, out=str(out), workers=1)
    k = json.loads((out / "kramers.json").read_text())
    assert k["target_2delta_classical"] == pytest.approx(2.25)
    assert len((out / "exit_times.csv").read_text().splitlines()) == 1 + 96


def test_exit_command_inline_scenario(tmp_path):
    cfg = {"seed": 4, "scenario": {"model": "ou-cubic-1d", "x_tilde": [1.0], "L": 2.0,
                                   "outer": {"kind": "box", "params": {"lo": [-2], "hi": [4]}},
                                   "inner": {"kind": "box", "params": {"lo": [0], "hi": [2]}}, "x0": [1.5]},
           "params": {"dt": 2e-3, "eps_list": [1.0, 0.8, 0.6], "paths": 16, "t_cap": 200.0}}
    run("exit", cfg, out=str(tmp_path / "e"), workers=1)
    cfg["scenario"]["x0"] = [3.0]
    with pytest.raises(ConfigError, match="x0_in_inner"):
        run("exit", cfg, out=str(tmp_path / "e"), workers=1)
    cfg["scenario"]["colour"] = "red"
    with pytest.raises(ConfigError):
        run("exit", cfg, out=str(tmp_path / "e"), workers=1)


def test_poc_command_is_worker_independent(tmp_path):
    cfg = {"seed": 5, "params": {"dt": 1e-2, "T": 0.5, "N_list": [16, 32, 64], "M_ref": 512, "replicates": 2,
                                 "stride": 5, "tol": 5e-2}}
    m1 = run("poc", cfg, out=str(tmp_path / "a"), workers=1)
    m2 = run("poc", cfg, out=str(tmp_path / "b"), workers=3)
    assert m1["outputs"] == m2["outputs"]
    rate = (tmp_path / "a" / "poc_rate.csv").read_text().splitlines()
    assert rate[0] == "N,sup_w2_squared,stderr" and len(rate) == 4


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "reflectmv", "simulate", "--seed", "1", "--out",
                          str(tmp_path / "s"), "--workers", "1", "--config", _write(tmp_path, _sim_cfg())],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "s" / "manifest.json").exists()
    res = subprocess.run([sys.executable, "-m", "reflectmv", "simulate", "--out", str(tmp_path / "s")],
                         capture_output=True, text=True)
    assert res.returncode == 2 and "seed" in res.stderr


def test_snapshot_positions_are_reproducible(tmp_path):
    a = run("simulate", _sim_cfg(), out=str(tmp_path / "a"), workers=1)
    b = run("simulate", _sim_cfg(), out=str(tmp_path / "b"), workers=1)
    assert a["outputs"] == b["outputs"]
    sa = read_snapshots_csv(tmp_path / "a" / "snapshots.csv")
    assert np.all(np.isfinite(sa[-1][2]))


def test_simulate_start_point(tmp_path):
    cfg = _sim_cfg()
    cfg["domain"] = {"kind": "box", "params": {"lo": [0.5], "hi": [1.5]}}
    # the catalog start point 3 lies outside this box: a configuration error
    assert main(["simulate", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2
    cfg["params"]["x0"] = [1.0]
    man = run("simulate", cfg, out=str(tmp_path / "o"), workers=1)
    assert man["domain_audit"]["reflected_states"] > 0 and man["domain_audit"]["exterior_states"] == 0
    snaps = read_snapshots_csv(tmp_path / "o" / "snapshots.csv")
    np.testing.assert_array_equal(snaps[0][2], 1.0)
    cfg["params"]["x0"] = [1.0, 2.0]
    with pytest.raises(ConfigError):
        run("simulate", cfg, out=str(tmp_path / "o"), workers=1)
