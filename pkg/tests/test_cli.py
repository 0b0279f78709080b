import json

import pytest

from opendyn.cli import main

LOCAL_CFG = {
    "kind": "local",
    "grid": {"dimension": 1, "n": 512},
    "seed": 3,
    "horizon": 16,
    "map": {"kind": "full_branch_1d", "cuts": [0.5]},
    "delta": 0.01,
    "holes": {"kind": "drifting_interval", "measure": 0.005,
              "center": 0.3, "velocity": 0.137},
    "psi": {"kind": "cosine_bump", "amplitude": 0.15},
    "zeta1": 0.8, "zeta2": 1.2,
    "seminorm": {"kind": "tv"},
    "certificates": {"stability_samples": 2},
}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_simulate_local_end_to_end(tmp_path, capsys):
    cfg = write(tmp_path, "local.json", LOCAL_CFG)
    code = main(["simulate-local", cfg, "--out", str(tmp_path / "out")])
    assert code == 0
    out = capsys.readouterr().out
    assert "verdict: pass" in out
    csv = (tmp_path / "out" / "report.csv").read_text().splitlines()
    assert csv[0] == "m,mass_phi,mass_psi,l1_distance"
    assert len(csv) == 1 + LOCAL_CFG["horizon"]
    summary = json.loads((tmp_path / "out" / "report_summary.json").read_text())
    assert summary["verdict"]["pass"] is True


def test_certify_mixing_exit_codes(tmp_path):
    good = write(tmp_path, "mix.json", {
        "map": {"kind": "full_branch_1d", "cuts": [0.5]},
        "grid": {"dimension": 1, "n": 1024},
        "partition": {"level": 3}, "zeta1": 0.9, "zeta2": 1.1, "i_max": 12})
    assert main(["certify-mixing", good]) == 0
    hopeless = write(tmp_path, "bad.json", {
        "map": {"kind": "full_branch_1d", "cuts": [0.5]},
        "grid": {"dimension": 1, "n": 1024},
        "partition": {"level": 3}, "zeta1": 0.999, "zeta2": 1.001,
        "i_max": 1})
    assert main(["certify-mixing", hopeless]) == 2


def test_certify_ly_writes_artifact(tmp_path):
    cfg = write(tmp_path, "ly.json", {
        "map": {"kind": "full_branch_1d", "cuts": [0.5]},
        "grid": {"dimension": 1, "n": 1024},
        "T1": 1, "k_max": 4, "ensemble_size": 12, "seed": 11,
        "seminorm": {"kind": "tv"}})
    code = main(["certify-ly", cfg, "--out", str(tmp_path / "arts")])
    assert code == 0
    cert = json.loads((tmp_path / "arts" / "ly_certificate.json").read_text())
    assert cert["theta"] <= 0.5 + 1e-9
    assert cert["C"] > 0.0


def test_select_params_and_constants(tmp_path, capsys):
    sel = write(tmp_path, "sel.json", {
        "zeta1": 0.9, "zeta2": 1.1, "theta": 0.5, "C": 1.0, "T1": 1,
        "sigma": 0.5, "seminorm": {"kind": "tv"},
        "map": {"kind": "full_branch_1d", "cuts": [0.5]},
        "grid": {"dimension": 1, "n": 2048}, "max_level": 8, "i_max": 16})
    assert main(["select-params", sel, "--out", str(tmp_path / "arts")]) == 0
    cp = json.loads((tmp_path / "arts" / "cone_params.json").read_text())
    assert cp["T"] == 5
    assert abs(cp["a"] - 5.161290322580645) < 1e-12
    con = write(tmp_path, "con.json", {"cone_params": {
        "a": 1.0, "sigma": 0.5, "T": 8, "zeta1": 0.9, "zeta2": 1.1,
        "d": 1.0 / 11, "M": 1.0, "seminorm": {"kind": "tv"}}})
    assert main(["constants", con]) == 0
    out = capsys.readouterr().out
    assert "3.008154793552548" in out
    assert "376.0577185154148" in out


def test_usage_and_config_errors(tmp_path):
    assert main(["no-such-command", "x.json"]) == 1
    assert main([]) == 1
    missing = str(tmp_path / "nope.json")
    assert main(["certify-mixing", missing]) == 1
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["certify-mixing", str(broken)]) == 1
    badmap = write(tmp_path, "badmap.json", {
        "map": {"kind": "full_branch_1d", "cuts": [0.9, 0.2]},
        "grid": {"dimension": 1, "n": 256},
        "partition": {"level": 2}, "zeta1": 0.9, "zeta2": 1.1})
    assert main(["certify-mixing", badmap]) == 1


def test_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path, "local.json", LOCAL_CFG)
    assert main(["simulate-local", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate-local", cfg, "--out", str(tmp_path / "b")]) == 0
    for name in ("report.csv", "report_summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes()
