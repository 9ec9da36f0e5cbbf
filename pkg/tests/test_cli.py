import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from obslab import cli
from obslab.errors import AlignmentError, EnergyNotPD, SchemaError, SequenceNotAveraging
from obslab.scenario import load_scenario

ROOT = Path(__file__).resolve().parents[1]
SCEN = ROOT / "demos" / "scenarios"


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def minimal(**extra):
    doc = {
        "domain": {"length": 1.0, "n_interior": 99},
        "window": {"a": 0.6, "b": 1.0, "T": 3.0},
        "components": [{"kind": "wave"}],
    }
    doc.update(extra)
    return doc


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def test_minimal_defaults(tmp_path):
    sc = load_scenario(write(tmp_path, minimal()))
    assert sc.cutoff == 24 and sc.compact_terms is False
    assert sc.n_times % 2 == 1 and sc.coupling.mode == "linked_identity"


def test_alignment(tmp_path):
    doc = minimal()
    doc["window"]["a"] = 0.33
    load_scenario(write(tmp_path, doc))
    doc["window"]["a"] = 0.335
    with pytest.raises(AlignmentError):
        load_scenario(write(tmp_path, doc))


def test_super_weights_must_sum_to_one(tmp_path, capsys):
    doc = minimal(mode="super")
    doc["components"] = [{"kind": "wave", "weight": 0.5}, {"kind": "wave", "weight": 0.499}]
    p = write(tmp_path, doc)
    with pytest.raises(SequenceNotAveraging):
        load_scenario(p)
    code, payload = run(["super", "--config", p], capsys)
    assert code == 2 and payload["error"]["class"] == "SequenceNotAveraging"


def test_schema_error_names_key(tmp_path):
    doc = minimal()
    del doc["window"]["T"]
    with pytest.raises(SchemaError, match="window.T"):
        load_scenario(write(tmp_path, doc))
    doc = minimal()
    doc["coupling"] = {"mode": "sideways"}
    with pytest.raises(SchemaError, match="coupling.mode"):
        load_scenario(write(tmp_path, doc))


def test_obsconst_identical_waves(capsys):
    code, rep = run(["obsconst", "--config", SCEN / "two_waves_identical.json"], capsys)
    assert code == 0
    assert rep["result"]["sigma_min"] == 0 and rep["result"]["c_obs"] == "inf"


def test_unknown_command(capsys):
    code, payload = run(["frobnicate", "--config", SCEN / "two_waves_identical.json"], capsys)
    assert code == 2 and payload["exit_code"] == 2


def test_missing_config_and_bad_flags(tmp_path, capsys):
    assert run(["obsconst", "--config", tmp_path / "nope.json"], capsys)[0] == 2
    assert run(["obsconst"], capsys)[0] == 2
    assert run(["sweep", "--config", SCEN / "wave_plus_first_order.json", "--m0", "3..x"], capsys)[0] == 2


def test_numerical_failure_exit_code(monkeypatch, capsys):
    def boom(*a, **k):
        raise EnergyNotPD("energy form is not positive definite")

    monkeypatch.setattr(cli, "observability_constants", boom)
    code, payload = run(["obsconst", "--config", SCEN / "two_waves_separated.json"], capsys)
    assert code == 3 and payload["error"]["type"] == "numerical"


def test_sweep_csv(tmp_path, capsys):
    code, _ = run(["sweep", "--config", SCEN / "wave_plus_first_order.json", "--m0", "1..10",
                   "--csv-dir", tmp_path, "--out", tmp_path / "r.json"], capsys)
    assert code == 0
    rows = list(csv.reader(open(tmp_path / "sweep.csv")))
    assert rows[0] == ["m0", "sigma_min", "C_obs"] and len(rows) == 11
    assert not list(tmp_path.glob(".*.tmp"))


def test_hmeasure_csv(tmp_path, capsys):
    code, rep = run(["hmeasure", "--config", SCEN / "hmeasure_wave.json", "--csv-dir", tmp_path,
                     "--bins", 90], capsys)
    assert code == 0 and rep["result"]["bins"] == 90
    rows = list(csv.reader(open(tmp_path / "hmeasure_m60.csv")))
    assert rows[0] == ["bin_center_angle_or_arc", "mass"] and len(rows) == 91
    assert rep["result"]["localisation"][-1]["fraction"] >= 0.9


@pytest.mark.parametrize("cmd,name", [
    ("modes", "two_waves_separated.json"),
    ("solve", "wave_plus_first_order.json"),
    ("symbols", "two_waves_separated.json"),
    ("gramian", "wave_plus_first_order.json"),
    ("simul", "simultaneous_wave_k2.json"),
    ("kernel", "simultaneous_wave_k2.json"),
    ("super", "superposition_waves.json"),
])
def test_every_command_runs(cmd, name, tmp_path, capsys):
    code, rep = run([cmd, "--config", SCEN / name, "--csv-dir", tmp_path], capsys)
    assert code == 0 and rep["command"] == cmd and rep["tool"] == "obslab"


def test_symbols_scaling_override(capsys):
    code, rep = run(["symbols", "--config", SCEN / "two_waves_separated.json", "--scaling", "parabolic"], capsys)
    assert code == 0 and rep["result"]["separation"]["hypersurface"] == "P"


def test_byte_identical_reports(tmp_path):
    outs = []
    for i, threads in enumerate(("1", "3")):
        out = tmp_path / f"r{i}.json"
        subprocess.run(
            [sys.executable, "-m", "obslab.cli", "obsconst", "--config", str(SCEN / "two_waves_separated.json"),
             "--out", str(out)],
            check=True, capture_output=True, env={**os.environ, "OBSLAB_THREADS": threads},
        )
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_json_non_finite_and_sorted():
    text = cli.dumps({"b": float("inf"), "a": [1.5, float("nan")]})
    assert text.index('"a"') < text.index('"b"') and '"inf"' in text and '"nan"' in text
