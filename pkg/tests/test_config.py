import json
import math

import numpy as np
import pytest

from qthermo.config import (
    ConfigError,
    build_protocol,
    load_protocol,
    parse_config,
    quantum_initial,
    quantum_segments,
)
from qthermo.quantum import KET0, PLUS, X_BASIS, Z_BASIS, rabi_propagator
from qthermo.stochastic import Bath, metropolis_kernel


def protocol_doc(**over):
    doc = {
        "states": 2,
        "initial_energies": [0.0, 0.0],
        "temperature": 1.0,
        "steps": [{"drive": [0.0, 1.0]}, {"bath": "metropolis"}],
    }
    doc.update(over)
    return doc


def test_minimal_ift_config_gets_defaults():
    cfg = parse_config({"kind": "ift", "params": {"protocol": protocol_doc()}})
    assert cfg.n == 100_000 and cfg.seed == 0
    assert cfg.output_format == "csv" and cfg.output_path is None


def test_json_text_accepted_and_malformed_rejected():
    text = json.dumps({"kind": "verify"})
    assert parse_config(text).kind == "verify"
    with pytest.raises(ConfigError, match="malformed JSON"):
        parse_config("{not json")


def test_negative_temperature_names_field():
    with pytest.raises(ConfigError) as exc:
        parse_config({"kind": "ift", "params": {"protocol": protocol_doc(temperature=-1.0)}})
    assert any("temperature" in e for e in exc.value.errors)


def test_bad_column_sum_reported():
    doc = protocol_doc(steps=[{"bath_matrix": [[0.5, 0.5], [0.4, 0.5]]}])
    with pytest.raises(ConfigError) as exc:
        parse_config({"kind": "ift", "params": {"protocol": doc}})
    assert any("column 0 sums to 0.9" in e for e in exc.value.errors)


def test_all_violations_collected():
    doc = {"kind": "ift", "seed": -3, "n": 0, "colour": "red", "params": {"protocol": protocol_doc()}}
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    assert len(exc.value.errors) >= 3
    joined = " ".join(exc.value.errors)
    assert "seed" in joined and "colour" in joined


def test_dimension_errors_collected():
    doc = protocol_doc(initial_energies=[0, 0, 0], steps=[{"drive": [1.0]}, {"bath_matrix": [[1.0]]}])
    with pytest.raises(ConfigError) as exc:
        parse_config({"kind": "jarzynski", "params": {"protocol": doc}})
    assert len(exc.value.errors) == 3


def test_unknown_step_and_params_rejected():
    doc = protocol_doc(steps=[{"bath": "glauber"}])
    with pytest.raises(ConfigError):
        parse_config({"kind": "ift", "params": {"protocol": doc}})
    with pytest.raises(ConfigError):
        parse_config({"kind": "engine", "params": {"omega": 1.0}})
    with pytest.raises(ConfigError, match="outside"):
        parse_config({"kind": "engine", "params": {"tau": 3.5}})


def test_hash_ignores_output_and_key_order():
    a = parse_config({"kind": "demon", "params": {"error_rate": 0.1, "input_bias": 0.5}, "output": {"path": "a.csv"}})
    b = parse_config({"params": {"input_bias": 0.5, "error_rate": 0.1}, "kind": "demon"})
    c = parse_config({"kind": "demon", "seed": 1, "params": {"error_rate": 0.1, "input_bias": 0.5}})
    assert a.config_hash() == b.config_hash() != c.config_hash()


def test_build_protocol_uses_current_landscape():
    proto = load_protocol(protocol_doc())
    bath = proto.steps[1]
    assert isinstance(bath, Bath)
    assert np.allclose(bath.kernel.matrix, metropolis_kernel([0.0, 1.0], 1.0).matrix)
    assert build_protocol(protocol_doc()).n_checkpoints == 2


def test_quantum_segments_fold_pulses():
    doc = {
        "omega0": 1.0,
        "initial": "+",
        "segments": [
            {"rabi": {"omega": 1.0, "t": 0.3}},
            {"rabi": {"omega": 1.0, "t": 0.4}},
            {"measure": "x"},
            {"measure": "z"},
            {"rabi": {"omega": 2.0, "t": 0.1}},
        ],
    }
    segs = quantum_segments(doc)
    assert len(segs) == 3
    assert np.allclose(segs[0][0], rabi_propagator(1.0, 0.7))
    assert segs[0][1] is X_BASIS
    assert np.allclose(segs[1][0], np.eye(2)) and segs[1][1] is Z_BASIS
    assert segs[2][1] is None
    assert np.allclose(quantum_initial(doc), PLUS)
    assert np.allclose(quantum_initial({"omega0": 1, "segments": []}), KET0)


def test_custom_basis_and_complex_amplitudes():
    s = 1 / math.sqrt(2)
    doc = {"omega0": 1.0, "initial": [[s, 0], [0, s]], "segments": [{"measure": [[[s, 0], [0, s]], [[s, 0], [0, -s]]]}]}
    cfg = parse_config({"kind": "quantum", "params": doc})
    (U, basis), = quantum_segments(cfg.params)
    assert abs(np.vdot(basis.state(0), quantum_initial(doc))) == pytest.approx(1.0)
    bad = {"omega0": 1.0, "segments": [{"measure": [[1, 0], [1, 0]]}]}
    with pytest.raises(ConfigError):
        parse_config({"kind": "quantum", "params": bad})
