"""Experiment configuration documents and their validation.

An experiment document looks like::

    {"kind": "ift", "seed": 0, "n": 100000,
     "params": {"protocol": {...}},
     "output": {"path": "ift.csv", "format": "csv"}}

Validation collects every violation (schema and semantic) before raising.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import jsonschema
import numpy as np

from .errors import ConfigurationError
from .quantum import (
    IDENTITY,
    KET0,
    KET1,
    MINUS,
    PLUS,
    X_BASIS,
    Z_BASIS,
    MeasurementBasis,
    pure_state,
    rabi_propagator,
)
from .stochastic import (
    Bath,
    Drive,
    EnergyLandscape,
    Protocol,
    TransitionKernel,
    boltzmann_distribution,
    heat_bath_kernel,
    metropolis_kernel,
)

KINDS = ("ift", "jarzynski", "gift", "demon", "quantum", "engine", "zeno-sweep", "gate-cost", "verify")
DEFAULT_N = 100_000
DEFAULT_SEED = 0


class ConfigError(ConfigurationError):
    """Validation failure carrying every problem found."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


_number = {"type": "number"}
_positive = {"type": "number", "exclusiveMinimum": 0}
_prob = {"type": "number", "minimum": 0, "maximum": 1}
_complex = {"oneOf": [_number, {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}]}

PROTOCOL_SCHEMA = {
    "type": "object",
    "required": ["states", "initial_energies", "temperature", "steps"],
    "additionalProperties": False,
    "properties": {
        "states": {"type": "integer", "minimum": 2},
        "initial_energies": {"type": "array", "items": _number, "minItems": 2},
        "temperature": _positive,
        "initial_distribution": {"type": "array", "items": _prob},
        "steps": {
            "type": "array",
            "minItems": 1,
            "items": {
                "oneOf": [
                    {
                        "type": "object",
                        "required": ["drive"],
                        "additionalProperties": False,
                        "properties": {"drive": {"type": "array", "items": _number}},
                    },
                    {
                        "type": "object",
                        "required": ["bath"],
                        "additionalProperties": False,
                        "properties": {"bath": {"enum": ["metropolis", "heat_bath"]}},
                    },
                    {
                        "type": "object",
                        "required": ["bath_matrix"],
                        "additionalProperties": False,
                        "properties": {
                            "bath_matrix": {"type": "array", "items": {"type": "array", "items": _number}}
                        },
                    },
                ]
            },
        },
    },
}

DEMON_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["error_rate", "input_bias"],
    "properties": {
        "error_rate": {"type": "number", "minimum": 0, "maximum": 0.5},
        "input_bias": _prob,
        "feedback": {"enum": ["reset", "identity"]},
        "temperature": _positive,
    },
}

QUANTUM_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["omega0", "segments"],
    "properties": {
        "omega0": _positive,
        "initial": {
            "oneOf": [
                {"enum": ["0", "1", "+", "-"]},
                {"type": "array", "items": _complex, "minItems": 2, "maxItems": 2},
            ]
        },
        "segments": {
            "type": "array",
            "minItems": 1,
            "items": {
                "oneOf": [
                    {
                        "type": "object",
                        "required": ["rabi"],
                        "additionalProperties": False,
                        "properties": {
                            "rabi": {
                                "type": "object",
                                "required": ["omega", "t"],
                                "additionalProperties": False,
                                "properties": {"omega": _number, "t": {"type": "number", "minimum": 0}},
                            }
                        },
                    },
                    {
                        "type": "object",
                        "required": ["measure"],
                        "additionalProperties": False,
                        "properties": {
                            "measure": {
                                "oneOf": [
                                    {"enum": ["z", "x"]},
                                    {
                                        "type": "array",
                                        "minItems": 2,
                                        "maxItems": 2,
                                        "items": {"type": "array", "items": _complex, "minItems": 2, "maxItems": 2},
                                    },
                                ]
                            }
                        },
                    },
                ]
            },
        },
    },
}

ENGINE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "omega0": _positive,
        "omega_rabi": _positive,
        "tau": _positive,
        "temperature": _positive,
        "cycles": {"type": "integer", "minimum": 1},
    },
}

SWEEP_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "omega0": _positive,
        "omega_rabi": _positive,
        "temperature": _positive,
        "tau_grid": {"type": "array", "items": _positive, "minItems": 1},
        "points": {"type": "integer", "minimum": 1},
        "tau_min": _positive,
        "tau_max": _positive,
    },
}

GATE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "nbar": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "g": _positive,
        "theta": {"type": "number", "minimum": 0},
        "freq_ghz": _positive,
        "threshold": {"type": "number", "exclusiveMinimum": 0.5, "exclusiveMaximum": 1},
    },
}

CLASSICAL_PARAMS = {
    "type": "object",
    "additionalProperties": False,
    "required": ["protocol"],
    "properties": {
        "protocol": PROTOCOL_SCHEMA,
        "initial": {"oneOf": [{"enum": ["boltzmann"]}, {"type": "array", "items": _prob}]},
        "final": {"oneOf": [{"enum": ["pushforward", "boltzmann"]}, {"type": "array", "items": _prob}]},
        "enumerate": {"type": "boolean"},
    },
}

PARAMS_SCHEMAS = {
    "ift": CLASSICAL_PARAMS,
    "jarzynski": CLASSICAL_PARAMS,
    "gift": DEMON_SCHEMA,
    "demon": DEMON_SCHEMA,
    "quantum": QUANTUM_SCHEMA,
    "engine": ENGINE_SCHEMA,
    "zeno-sweep": SWEEP_SCHEMA,
    "gate-cost": GATE_SCHEMA,
    "verify": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"criteria": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 10}}},
    },
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": list(KINDS)},
        "seed": {"type": "integer", "minimum": 0},
        "n": {"type": "integer", "minimum": 1},
        "si": {"type": "boolean"},
        "params": {"type": "object"},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "path": {"type": ["string", "null"]},
                "format": {"enum": ["csv", "json"]},
            },
        },
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    params: Dict[str, Any]
    seed: int = DEFAULT_SEED
    n: int = DEFAULT_N
    si: bool = False
    output_path: Optional[str] = None
    output_format: str = "csv"

    def canonical(self) -> Dict[str, Any]:
        """Everything that determines the numerical result (no output path, no workers)."""
        return {"kind": self.kind, "params": self.params, "seed": self.seed, "n": self.n, "si": self.si}

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_document(self) -> Dict[str, Any]:
        doc = self.canonical()
        doc["output"] = {"path": self.output_path, "format": self.output_format}
        return doc


def _path(err: jsonschema.ValidationError, prefix: str = "") -> str:
    parts = [str(p) for p in err.absolute_path]
    return prefix + ("/".join(parts) if parts else "<root>")


def _schema_errors(schema, doc, prefix="") -> List[str]:
    validator = jsonschema.Draft7Validator(schema)
    out = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path))):
        if err.validator == "oneOf" and err.context:
            # report the closest alternative rather than the opaque oneOf failure
            best = jsonschema.exceptions.best_match(err.context)
            out.append(f"{_path(err, prefix)}: {best.message}")
        else:
            out.append(f"{_path(err, prefix)}: {err.message}")
    return out


# --------------------------------------------------------------------------
# Semantic checks and builders


def protocol_errors(doc: Dict[str, Any], prefix: str = "protocol/") -> List[str]:
    """Dimension and stochasticity problems of a schema-valid protocol document."""
    errors = []
    n = doc["states"]
    if len(doc["initial_energies"]) != n:
        errors.append(f"{prefix}initial_energies: has {len(doc['initial_energies'])} entries, states = {n}")
    if "initial_distribution" in doc:
        p = doc["initial_distribution"]
        if len(p) != n:
            errors.append(f"{prefix}initial_distribution: has {len(p)} entries, states = {n}")
        elif abs(sum(p) - 1.0) > 1e-12:
            errors.append(f"{prefix}initial_distribution: sums to {sum(p)!r}, not 1")
    for k, step in enumerate(doc["steps"]):
        where = f"{prefix}steps/{k}"
        if "drive" in step and len(step["drive"]) != n:
            errors.append(f"{where}/drive: has {len(step['drive'])} entries, states = {n}")
        if "bath_matrix" in step:
            m = step["bath_matrix"]
            if len(m) != n or any(len(row) != n for row in m):
                errors.append(f"{where}/bath_matrix: must be {n}x{n}")
                continue
            a = np.asarray(m, dtype=float)
            if np.any(a < 0) or np.any(a > 1):
                errors.append(f"{where}/bath_matrix: entries must lie in [0, 1]")
            sums = a.sum(axis=0)
            for j, s in enumerate(sums):
                if abs(s - 1.0) > 1e-12:
                    errors.append(f"{where}/bath_matrix: column {j} sums to {s:.12g}, not 1 (not stochastic)")
    return errors


def build_protocol(doc: Dict[str, Any]) -> Protocol:
    """Protocol object from a validated protocol document."""
    T = float(doc["temperature"])
    land = EnergyLandscape(doc["initial_energies"])
    current = land
    steps = []
    for step in doc["steps"]:
        if "drive" in step:
            current = EnergyLandscape(step["drive"])
            steps.append(Drive(current))
        elif "bath" in step:
            make = metropolis_kernel if step["bath"] == "metropolis" else heat_bath_kernel
            steps.append(Bath(make(current, T)))
        else:
            steps.append(Bath(TransitionKernel(np.asarray(step["bath_matrix"], dtype=float))))
    return Protocol(land, tuple(steps), bath_temperature=T)


def load_protocol(doc: Dict[str, Any]) -> Protocol:
    """Validate and build; raises :class:`ConfigError` listing all problems."""
    errors = _schema_errors(PROTOCOL_SCHEMA, doc, "protocol/")
    if not errors:
        errors = protocol_errors(doc)
    if errors:
        raise ConfigError(errors)
    return build_protocol(doc)


def initial_distribution(params: Dict[str, Any], protocol: Protocol, protocol_doc: Dict[str, Any]) -> np.ndarray:
    choice = params.get("initial")
    if choice is None:
        choice = protocol_doc.get("initial_distribution", "boltzmann")
    if isinstance(choice, str):
        return boltzmann_distribution(protocol.initial_landscape, protocol.bath_temperature)
    return np.asarray(choice, dtype=float)


def final_distribution(params: Dict[str, Any], protocol: Protocol) -> Optional[np.ndarray]:
    choice = params.get("final", "pushforward")
    if choice == "pushforward":
        return None
    if choice == "boltzmann":
        return boltzmann_distribution(protocol.final_landscape, protocol.bath_temperature)
    return np.asarray(choice, dtype=float)


def _to_complex(x) -> complex:
    return complex(x[0], x[1]) if isinstance(x, list) else complex(x)


NAMED_STATES = {"0": KET0, "1": KET1, "+": PLUS, "-": MINUS}


def quantum_initial(doc: Dict[str, Any]) -> np.ndarray:
    choice = doc.get("initial", "0")
    if isinstance(choice, str):
        return NAMED_STATES[choice]
    return pure_state([_to_complex(a) for a in choice], normalize=True)


def quantum_segments(doc: Dict[str, Any]) -> List[Tuple[np.ndarray, Optional[MeasurementBasis]]]:
    """Fold consecutive Rabi pulses into one unitary per measurement."""
    segments = []
    U = IDENTITY
    pending = False
    for seg in doc["segments"]:
        if "rabi" in seg:
            U = rabi_propagator(seg["rabi"]["omega"], seg["rabi"]["t"]) @ U
            pending = True
            continue
        m = seg["measure"]
        if m == "z":
            basis = Z_BASIS
        elif m == "x":
            basis = X_BASIS
        else:
            vecs = [pure_state([_to_complex(a) for a in v], normalize=True) for v in m]
            basis = MeasurementBasis.from_states(*vecs)
        segments.append((U, basis))
        U = IDENTITY
        pending = False
    if pending:
        segments.append((U, None))
    return segments


def _semantic_errors(kind: str, params: Dict[str, Any]) -> List[str]:
    errors: List[str] = []
    if kind in ("ift", "jarzynski"):
        doc = params["protocol"]
        errors += protocol_errors(doc, "params/protocol/")
        n = doc["states"]
        for key in ("initial", "final"):
            v = params.get(key)
            if isinstance(v, list):
                if len(v) != n:
                    errors.append(f"params/{key}: has {len(v)} entries, states = {n}")
                elif abs(sum(v) - 1.0) > 1e-12:
                    errors.append(f"params/{key}: sums to {sum(v)!r}, not 1")
        if kind == "jarzynski" and isinstance(params.get("initial"), list):
            errors.append("params/initial: Jarzynski runs start from the Boltzmann distribution")
    elif kind == "quantum":
        try:
            quantum_initial(params)
            quantum_segments(params)
        except (ValueError, ConfigurationError) as exc:
            errors.append(f"params/segments: {exc}")
    elif kind in ("engine", "zeno-sweep"):
        omega = params.get("omega_rabi", 1.0)
        taus = params.get("tau_grid") or [params.get("tau", math.pi / 2)]
        if kind == "zeno-sweep" and "tau_grid" not in params:
            taus = [params.get("tau_min", 0.01 / omega), params.get("tau_max", math.pi / 2 / omega)]
        for t in taus:
            if not 0 < omega * t < math.pi:
                errors.append(f"params: omega_rabi * tau = {omega * t} outside (0, pi)")
    return errors


def parse_config(document) -> ExperimentConfig:
    """Validate a JSON document, given as text or already parsed.

    Raises :class:`ConfigError` with every schema and consistency violation.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"malformed JSON: {exc}"]) from exc
    errors = _schema_errors(EXPERIMENT_SCHEMA, document)
    if errors:
        raise ConfigError(errors)
    kind = document["kind"]
    params = copy.deepcopy(document.get("params", {}))
    errors = _schema_errors(PARAMS_SCHEMAS[kind], params, "params/")
    if not errors:
        errors = _semantic_errors(kind, params)
    if errors:
        raise ConfigError(errors)
    out = document.get("output", {})
    return ExperimentConfig(
        kind=kind,
        params=params,
        seed=document.get("seed", DEFAULT_SEED),
        n=document.get("n", DEFAULT_N),
        si=document.get("si", False),
        output_path=out.get("path"),
        output_format=out.get("format", "csv"),
    )
