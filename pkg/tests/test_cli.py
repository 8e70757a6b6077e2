import csv
import io
import json
import math

import pytest

from qthermo import acceptance, cli
from qthermo.config import parse_config


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_ift_bundled_writes_result_and_manifest(tmp_path, capsys):
    out = tmp_path / "ift.csv"
    code, _, _ = run(["ift", "--bundled", "two_state_quench_relax", "--out", str(out)], capsys)
    assert code == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["theorem", "mean", "std_error", "target", "n", "abs_irrev_fraction", "verdict"]
    assert rows[0]["theorem"] == "ift" and rows[0]["verdict"] == "= 1"
    assert abs(float(rows[1]["mean"]) - 1.0) < 1e-10
    manifest = json.loads((tmp_path / "ift.manifest.json").read_text())
    for key in ("config_hash", "seed", "tool_version", "wall_clock_seconds", "result_summary", "timestamp"):
        assert key in manifest
    assert manifest["config_hash"] == parse_config(manifest["config"]).config_hash()


def test_same_seed_same_bytes_any_workers(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["ift", "--bundled", "three_state_cycle", "--seed", "5", "--workers", "1", "--out", str(a)], capsys)[0] == 0
    assert run(["ift", "--bundled", "three_state_cycle", "--seed", "5", "--workers", "3", "--out", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    ma = json.loads((tmp_path / "a.manifest.json").read_text())
    mb = json.loads((tmp_path / "b.manifest.json").read_text())
    for key in ("config_hash", "result_sha256", "result_summary", "config"):
        if key == "config":
            ma[key]["output"] = mb[key]["output"] = None
        assert ma[key] == mb[key]


def test_manifest_reruns_bit_exactly(tmp_path, capsys):
    first = tmp_path / "first.json"
    assert run(["demon", "--error-rate", "0.2", "--input-bias", "0.3", "--format", "json", "--out", str(first)], capsys)[0] == 0
    manifest = json.loads((tmp_path / "first.manifest.json").read_text())
    doc = manifest["config"]
    doc["output"]["path"] = str(tmp_path / "second.json")
    code, _, _ = run(["run", write(tmp_path, "again.json", doc)], capsys)
    assert code == 0
    assert (tmp_path / "second.json").read_bytes() == first.read_bytes()


def test_env_var_sets_workers(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("QTHERMO_WORKERS", "2")
    code, out, _ = run(["jarzynski", "--bundled", "two_state_quench_relax", "-n", "5000"], capsys)
    monkeypatch.delenv("QTHERMO_WORKERS")
    code1, out1, _ = run(["jarzynski", "--bundled", "two_state_quench_relax", "-n", "5000"], capsys)
    assert code == code1 == 0 and out == out1


def test_validation_failures_exit_2(tmp_path, capsys):
    bad = {"states": 2, "initial_energies": [0, 1], "temperature": -1, "steps": [{"bath": "metropolis"}]}
    code, _, err = run(["ift", "--protocol", write(tmp_path, "p.json", bad)], capsys)
    assert code == 2 and "temperature" in err
    assert run(["engine", "--tau", "5"], capsys)[0] == 2
    assert run(["ift"], capsys)[0] == 2
    assert run(["run", str(tmp_path / "missing.json")], capsys)[0] == 2
    assert run(["demon", "--error-rate", "0.1", "--input-bias", "0.5", "--workers", "0"], capsys)[0] == 2


def test_capacity_exit_4(tmp_path, capsys):
    doc = {"states": 2, "initial_energies": [0, 1], "temperature": 1, "steps": [{"bath": "metropolis"}] * 24}
    path = write(tmp_path, "long.json", doc)
    code, _, err = run(["ift", "--protocol", path, "--enumerate", "-n", "200"], capsys)
    assert code == 4 and "33554432" in err
    # without the explicit request the transfer-matrix route is used
    code, out, _ = run(["ift", "--protocol", path, "-n", "200"], capsys)
    assert code == 0 and "ift_exact" in out


def test_demon_and_gift_outputs(capsys):
    code, out, _ = run(["demon", "--error-rate", "0.1", "--input-bias", "0.5"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and list(rows[0]) == ["dS_bits", "dI_bits", "Si_nats", "ift_mean", "eta"]
    assert float(rows[0]["ift_mean"]) == pytest.approx(1.0)
    code, out, err = run(["demon", "--error-rate", "0.1", "--input-bias", "0.5", "--feedback", "identity"], capsys)
    assert list(csv.DictReader(io.StringIO(out)))[0]["eta"] == ""
    code, out, _ = run(["gift", "--error-rate", "0.3", "--input-bias", "0.5", "--format", "json"], capsys)
    payload = json.loads(out)
    assert len(payload["rows"]) == 8
    assert sum(r["probability"] for r in payload["rows"]) == pytest.approx(1.0)


def test_quantum_command(tmp_path, capsys):
    doc = {"omega0": 1.0, "segments": [{"rabi": {"omega": 1.0, "t": math.pi / 2}}, {"measure": "z"}] * 2}
    code, out, _ = run(["quantum", "--config", write(tmp_path, "q.json", doc), "-n", "2000"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 4
    assert sum(float(r["probability"]) for r in rows) == pytest.approx(1.0)
    assert sum(float(r["sampled_fraction"]) for r in rows) == pytest.approx(1.0)


def test_engine_sweep_and_gate(capsys):
    code, out, _ = run(["engine", "--cycles", "500", "--tau", str(math.pi / 2), "--temp", "0.1"], capsys)
    row = list(csv.DictReader(io.StringIO(out)))[0]
    assert code == 0 and float(row["eta_exact"]) == pytest.approx(1 - 0.2 * math.log(2))
    code, out, _ = run(["zeno-sweep", "--points", "20"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0])[:7] == ["omega_tau", "p_minus", "W", "Qq", "WL", "eta", "power"]
    assert len(rows) == 20 and float(rows[0]["omega_tau"]) == pytest.approx(0.01)
    code, out, _ = run(["gate-cost", "--nbar", "1000", "--freq-ghz", "6"], capsys)
    row = list(csv.DictReader(io.StringIO(out)))[0]
    assert list(row) == ["nbar", "fidelity", "energy_J", "ratio_to_landauer_300K"]
    assert float(row["energy_J"]) == pytest.approx(3.97e-21, rel=5e-3)


def test_si_engine_scales_energies(capsys):
    # omega0 = 1e10 rad/s, memory at 0.01 K
    argv = ["engine", "--si", "--omega0", "1e10", "--omega-rabi", "1e9", "--tau", "1e-9", "--temp", "0.01", "--cycles", "100"]
    code, out, _ = run(argv, capsys)
    row = list(csv.DictReader(io.StringIO(out)))[0]
    assert code == 0
    assert float(row["W"]) == pytest.approx(1.054571817e-34 * 0.5e10 * math.sin(1.0))


def test_verify_subset_and_failure(tmp_path, capsys, monkeypatch):
    out = tmp_path / "v.csv"
    code, _, err = run(["verify", "--criteria", "5", "6", "--out", str(out)], capsys)
    assert code == 0 and "[PASS] criterion  5" in err
    assert {r["criterion"] for r in read_csv(out)} == {"5", "6"}

    def broken(seed=0, workers=None):
        return acceptance.CriterionResult(6, "broken", False, {"x": 1.0})

    monkeypatch.setitem(acceptance.CHECKS, 6, broken)
    code, _, err = run(["verify", "--criteria", "6"], capsys)
    assert code == 3 and "[FAIL]" in err


def test_global_flags_before_subcommand(capsys):
    a = run(["--seed", "4", "jarzynski", "--bundled", "two_state_quench_relax", "-n", "1000"], capsys)
    b = run(["jarzynski", "--bundled", "two_state_quench_relax", "-n", "1000", "--seed", "4"], capsys)
    c = run(["jarzynski", "--bundled", "two_state_quench_relax", "-n", "1000"], capsys)
    assert a[1] == b[1] != c[1]


def test_engine_document_n_sets_cycles(tmp_path, capsys):
    doc = {"kind": "engine", "n": 300, "params": {"tau": 1.0}, "output": {"path": str(tmp_path / "e.csv")}}
    assert run(["run", write(tmp_path, "e.json", doc)], capsys)[0] == 0
    assert read_csv(tmp_path / "e.csv")[0]["cycles"] == "300"
    doc["params"]["cycles"] = 200
    assert run(["run", write(tmp_path, "e.json", doc)], capsys)[0] == 0
    assert read_csv(tmp_path / "e.csv")[0]["cycles"] == "200"
