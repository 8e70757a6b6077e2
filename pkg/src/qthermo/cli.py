"""Command-line experiment runner.

Every subcommand builds an experiment document, validates it with
:func:`qthermo.config.parse_config`, runs it and writes a CSV or JSON result.
Whenever a result file is written, a ``<name>.manifest.json`` lands next to it.

Exit codes: 0 success, 2 invalid input, 3 failed acceptance check, 4 capacity.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import sys
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    ExperimentConfig,
    build_protocol,
    final_distribution,
    initial_distribution,
    parse_config,
    quantum_initial,
    quantum_segments,
)
from .errors import CapacityError, ConfigurationError, DomainError
from .units import HBAR, kelvin_to_angular

EXIT_OK, EXIT_INVALID, EXIT_ACCEPTANCE, EXIT_CAPACITY = 0, 2, 3, 4


@dataclass
class RunResult:
    columns: List[str]
    rows: List[List[Any]]
    summary: Dict[str, Any] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)
    exit_code: int = EXIT_OK
    messages: List[str] = field(default_factory=list)


# --------------------------------------------------------------------------
# Experiments


def _verdict(ok: bool) -> str:
    return "consistent" if ok else "inconsistent"


def _exact_row(theorem, protocol, p0, p1, params, target, value_of):
    from .fluctuation import ENUMERATION_CAP, enumerate_exact, enumeration_size, transfer_averages

    mode = params.get("enumerate")
    if mode is False:
        return None
    size = enumeration_size(protocol)
    if mode is True or size <= ENUMERATION_CAP:
        rep = enumerate_exact(protocol, p0, final=p1)
    else:
        rep = transfer_averages(protocol, p0, final=p1)
    weight = rep.absolute_irreversibility_weight
    value = value_of(rep)
    if theorem == "ift":
        verdict = "<= 1 expected" if weight > 0 else "= 1"
    else:
        verdict = _verdict(abs(value - target) <= 1e-10)
    return [f"{theorem}_exact", value, 0.0, target, size, weight, verdict]


def run_ift(cfg: ExperimentConfig, workers) -> RunResult:
    from .fluctuation import ift_estimate

    params = cfg.params
    protocol = build_protocol(params["protocol"])
    p0 = initial_distribution(params, protocol, params["protocol"])
    p1 = final_distribution(params, protocol)
    mc = ift_estimate(protocol, p0, cfg.n, cfg.seed, final=p1, workers=workers)
    rows = [["ift", mc.mean, mc.std_error, 1.0, cfg.n, mc.absolute_irreversibility_fraction, mc.ift_verdict]]
    exact = _exact_row("ift", protocol, p0, p1, params, 1.0, lambda r: r.mean_exp_minus_entropy_production)
    if exact:
        rows.append(exact)
    summary = {"mean": mc.mean, "std_error": mc.std_error, "within_4_sigma": mc.within(1.0)}
    return RunResult(COLUMNS["theorem"], rows, summary)


def run_jarzynski(cfg: ExperimentConfig, workers) -> RunResult:
    from .fluctuation import jarzynski_estimate
    from .stochastic import boltzmann_distribution

    params = cfg.params
    protocol = build_protocol(params["protocol"])
    T = protocol.bath_temperature
    mc, target = jarzynski_estimate(protocol, T, cfg.n, cfg.seed, workers=workers)
    rows = [["jarzynski", mc.mean, mc.std_error, target, cfg.n, 0.0, _verdict(mc.within(target))]]
    p0 = boltzmann_distribution(protocol.initial_landscape, T)
    p1 = boltzmann_distribution(protocol.final_landscape, T)
    exact = _exact_row("jarzynski", protocol, p0, p1, params, target, lambda r: r.mean_exp_minus_work)
    if exact:
        rows.append(exact)
    summary = {"mean": mc.mean, "std_error": mc.std_error, "target": target, "within_4_sigma": mc.within(target)}
    return RunResult(COLUMNS["theorem"], rows, summary)


def _demon_args(cfg):
    p = cfg.params
    return dict(
        error_rate=p["error_rate"],
        input_bias=p["input_bias"],
        feedback=p.get("feedback", "reset"),
        temperature=p.get("temperature", 1.0),
        si=cfg.si,
    )


def run_demon_cmd(cfg: ExperimentConfig, workers) -> RunResult:
    from .demon import run_demon

    res = run_demon(**_demon_args(cfg))
    led = res.ledger
    row = [led.delta_S_bits, led.delta_I_bits, led.entropy_production_nats, res.ift_mean, res.eta]
    summary = dict(zip(COLUMNS["demon"], row))
    summary["landauer_cost"] = led.landauer_cost
    summary["ideal_feedback"] = res.report.ideal
    extra = {"landauer_cost": led.landauer_cost, "landauer_unit": "J" if cfg.si else "T", "ideal_feedback": res.report.ideal}
    msgs = [] if res.report.ideal else ["feedback is not a symmetric permutation; the information form is advisory"]
    return RunResult(COLUMNS["demon"], [row], summary, extra, messages=msgs)


def run_gift(cfg: ExperimentConfig, workers) -> RunResult:
    from .demon import run_demon

    res = run_demon(**_demon_args(cfg))
    rep = res.report
    rows = []
    for i, (x, m, y) in enumerate(rep.paths.tolist()):
        rows.append(
            [
                x,
                m,
                y,
                float(rep.probabilities[i]),
                float(rep.delta_S_bits[i]),
                float(rep.delta_I_bits[i]),
                float(rep.entropy_production[i]),
                float(rep.entropy_production_gift[i]),
                bool(rep.backward_probability_zero[i]),
            ]
        )
    summary = {
        "mean_exp_minus_entropy_production": rep.mean_exp_minus_entropy_production,
        "mean_dS_bits": rep.mean_delta_S_bits,
        "mean_dI_bits": rep.mean_delta_I_bits,
        "ideal_feedback": rep.ideal,
    }
    return RunResult(COLUMNS["gift"], rows, summary)


def run_quantum(cfg: ExperimentConfig, workers) -> RunResult:
    from .fluctuation import batch_means
    from .quantum import enumerate_quantum_branches, sample_quantum_trajectories

    params = cfg.params
    omega0 = params["omega0"]
    initial = quantum_initial(params)
    segments = quantum_segments(params)
    scale = HBAR if cfg.si else 1.0
    branches = enumerate_quantum_branches(initial, segments, omega0)
    sample = sample_quantum_trajectories(initial, segments, omega0, cfg.n, cfg.seed, workers=workers)
    counts = Counter(sample.outcomes)

    def label(outcomes):
        return "".join("u" if k is None else str(k) for k in outcomes)

    rows = [
        [
            label(b.outcomes),
            b.probability,
            counts.get(b.outcomes, 0) / cfg.n,
            b.work * scale,
            b.quantum_heat * scale,
            b.entropy_production,
            b.delta_energy * scale,
        ]
        for b in branches
    ]
    summary = {"exact_mean_entropy_production": float(sum(b.probability * b.entropy_production for b in branches))}
    for name, values, unit in (
        ("work", sample.work, scale),
        ("quantum_heat", sample.quantum_heat, scale),
        ("entropy_production", sample.entropy_production, 1.0),
    ):
        mean, se = batch_means(values)
        summary[f"sampled_mean_{name}"] = mean * unit
        summary[f"sampled_{name}_std_error"] = se * unit
    return RunResult(COLUMNS["quantum"], rows, summary)


def _engine_config(params, seed, si, tau=None, n=100_000):
    from .engine import EngineConfig

    T = params.get("temperature", 0.1)
    return EngineConfig(
        omega0=params.get("omega0", 1.0),
        omega_rabi=params.get("omega_rabi", 1.0),
        tau=params.get("tau", math.pi / 2) if tau is None else tau,
        memory_temperature=kelvin_to_angular(T) if si else T,
        n_cycles=params.get("cycles", n),  # explicit cycles win over the document n
        seed=seed,
    )


def run_engine_cmd(cfg: ExperimentConfig, workers) -> RunResult:
    from .engine import exact_cycle, run_engine

    config = _engine_config(cfg.params, cfg.seed, cfg.si, n=cfg.n)
    s = HBAR if cfg.si else 1.0
    perf = run_engine(config)
    exact = exact_cycle(config)
    row = [
        config.omega_tau,
        perf.outcome_minus_fraction,
        perf.minus_fraction_std_error,
        exact.p_minus,
        perf.mean_work * s,
        perf.work_std_error * s,
        perf.mean_quantum_heat * s,
        perf.quantum_heat_std_error * s,
        perf.mean_landauer * s,
        perf.eta,
        perf.power * s,
        exact.eta,
        exact.power * s,
        perf.n_cycles,
    ]
    summary = dict(zip(COLUMNS["engine"], row))
    return RunResult(COLUMNS["engine"], [row], summary)


def sweep_grid(params) -> List[float]:
    if "tau_grid" in params:
        return [float(t) for t in params["tau_grid"]]
    omega = params.get("omega_rabi", 1.0)
    lo = params.get("tau_min", 0.01 / omega)
    hi = params.get("tau_max", math.pi / 2 / omega)
    points = params.get("points", 20)
    return np.linspace(lo, hi, points).tolist()


def run_sweep(cfg: ExperimentConfig, workers) -> RunResult:
    from .engine import zeno_sweep

    grid = sweep_grid(cfg.params)
    config = _engine_config(cfg.params, cfg.seed, cfg.si, tau=grid[0])
    s = HBAR if cfg.si else 1.0
    rows = [
        [r.omega_tau, r.p_minus, r.work * s, r.quantum_heat * s, r.landauer * s, r.eta, r.power * s, r.work_closed_form * s]
        for r in zeno_sweep(config, grid)
    ]
    best = max(rows, key=lambda r: r[6])
    summary = {"points": len(rows), "max_power_omega_tau": best[0], "max_eta": max(r[5] for r in rows if r[5] is not None)}
    return RunResult(COLUMNS["zeno-sweep"], rows, summary)


def run_gate(cfg: ExperimentConfig, workers) -> RunResult:
    from .gates import gate_fidelity, landauer_ratio, min_photons_for_fidelity

    p = cfg.params
    g = p.get("g", 1.0)
    theta = p.get("theta", math.pi / 2)
    freq = p.get("freq_ghz", 6.0) * 1e9
    nbars = [float(x) for x in p.get("nbar", [1000.0])]
    summary: Dict[str, Any] = {}
    if "threshold" in p:
        n_star = min_photons_for_fidelity(p["threshold"], g, theta)
        summary["threshold"] = p["threshold"]
        summary["n_star"] = n_star
        if n_star not in nbars:
            nbars.append(n_star)
    rows = []
    for nb in sorted(set(nbars)):
        r = gate_fidelity(theta, nb, g, freq)
        rows.append([nb, r.fidelity, r.energy_joules, landauer_ratio(r.energy_joules)])
    summary["rows"] = len(rows)
    return RunResult(COLUMNS["gate-cost"], rows, summary)


def run_verify(cfg: ExperimentConfig, workers) -> RunResult:
    from .acceptance import run_all, summary_line

    results = run_all(seed=cfg.seed, workers=workers, criteria=cfg.params.get("criteria"))
    rows = []
    for res in results:
        for key, value in res.metrics.items():
            rows.append([res.number, res.name, res.passed, key, value])
    failed = [r.number for r in results if not r.passed]
    summary = {
        "criteria": [r.number for r in results],
        "failed": failed,
        "seconds": {str(r.number): round(r.seconds, 3) for r in results},
    }
    return RunResult(
        COLUMNS["verify"],
        rows,
        summary,
        exit_code=EXIT_ACCEPTANCE if failed else EXIT_OK,
        messages=[summary_line(r) for r in results],
    )


COLUMNS = {
    "theorem": ["theorem", "mean", "std_error", "target", "n", "abs_irrev_fraction", "verdict"],
    "demon": ["dS_bits", "dI_bits", "Si_nats", "ift_mean", "eta"],
    "gift": ["x", "m", "y", "probability", "dS_bits", "dI_bits", "Si_nats", "Si_gift_nats", "backward_zero"],
    "quantum": ["outcomes", "probability", "sampled_fraction", "work", "quantum_heat", "entropy_production", "delta_energy"],
    "engine": [
        "omega_tau", "p_minus", "p_minus_std_error", "p_minus_exact", "W", "W_std_error", "Qq", "Qq_std_error",
        "WL", "eta", "power", "eta_exact", "power_exact", "cycles",
    ],
    "zeno-sweep": ["omega_tau", "p_minus", "W", "Qq", "WL", "eta", "power", "W_closed_form"],
    "gate-cost": ["nbar", "fidelity", "energy_J", "ratio_to_landauer_300K"],
    "verify": ["criterion", "name", "passed", "metric", "value"],
}

RUNNERS: Dict[str, Callable[[ExperimentConfig, Optional[int]], RunResult]] = {
    "ift": run_ift,
    "jarzynski": run_jarzynski,
    "gift": run_gift,
    "demon": run_demon_cmd,
    "quantum": run_quantum,
    "engine": run_engine_cmd,
    "zeno-sweep": run_sweep,
    "gate-cost": run_gate,
    "verify": run_verify,
}


# --------------------------------------------------------------------------
# Serialisation


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render(result: RunResult, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(result.columns)
        for row in result.rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()
    payload = {"columns": result.columns, "rows": [dict(zip(result.columns, map(_jsonable, r))) for r in result.rows]}
    payload.update({k: _jsonable(v) for k, v in result.extra.items()})
    return json.dumps(payload, indent=2) + "\n"


def _jsonable(v):
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def manifest_path(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest.json")


def build_manifest(cfg: ExperimentConfig, result: RunResult, seconds: float, body: str, out: Path) -> Dict[str, Any]:
    return {
        "tool": "qthermo",
        "tool_version": __version__,
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "config": cfg.to_document(),
        "result_file": out.name,
        "result_sha256": hashlib.sha256(body.encode()).hexdigest(),
        "result_summary": _jsonable(result.summary),
        "wall_clock_seconds": round(seconds, 6),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def execute(cfg: ExperimentConfig, workers: Optional[int] = None, stdout=None, stderr=None) -> int:
    """Run a validated experiment and write its artifacts; returns the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    t0 = time.perf_counter()
    try:
        result = RUNNERS[cfg.kind](cfg, workers)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=stderr)
        return EXIT_CAPACITY
    except (ConfigurationError, DomainError) as exc:
        print(f"invalid input: {exc}", file=stderr)
        return EXIT_INVALID
    seconds = time.perf_counter() - t0
    for msg in result.messages:
        print(msg, file=stderr)
    body = render(result, cfg.output_format)
    if cfg.output_path:
        out = Path(cfg.output_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(body)
        manifest = build_manifest(cfg, result, seconds, body, out)
        manifest_path(out).write_text(json.dumps(manifest, indent=2) + "\n")
    else:
        stdout.write(body)
    return result.exit_code


# --------------------------------------------------------------------------
# Argument parsing


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: malformed JSON: {exc}"]) from exc


def _bundled_doc(name: str):
    from importlib import resources

    entry = resources.files("qthermo").joinpath(f"data/protocols/{name}.json")
    if not entry.is_file():
        raise ConfigError([f"no bundled protocol named {name!r}"])
    return json.loads(entry.read_text())


def _params_classical(args):
    if (args.protocol is None) == (args.bundled is None):
        raise ConfigError(["give exactly one of --protocol FILE or --bundled NAME"])
    doc = _read_json(args.protocol) if args.protocol else _bundled_doc(args.bundled)
    params: Dict[str, Any] = {"protocol": doc}
    if args.enumerate is not None:
        params["enumerate"] = args.enumerate
    return params


def _params_demon(args):
    params = _read_json(args.config) if args.config else {}
    for key, attr in (("error_rate", "error_rate"), ("input_bias", "input_bias"), ("feedback", "feedback"), ("temperature", "temp")):
        value = getattr(args, attr)
        if value is not None:
            params[key] = value
    return params


def _params_quantum(args):
    return _read_json(args.config)


def _params_engine(args):
    params = {}
    for key, attr in (("omega0", "omega0"), ("omega_rabi", "omega_rabi"), ("tau", "tau"), ("temperature", "temp"), ("cycles", "cycles")):
        value = getattr(args, attr)
        if value is not None:
            params[key] = value
    return params


def _params_sweep(args):
    params = {}
    for key, attr in (("omega0", "omega0"), ("omega_rabi", "omega_rabi"), ("temperature", "temp"), ("points", "points"), ("tau_min", "tau_min"), ("tau_max", "tau_max")):
        value = getattr(args, attr)
        if value is not None:
            params[key] = value
    if args.tau_grid:
        params["tau_grid"] = args.tau_grid
    return params


def _params_gate(args):
    params: Dict[str, Any] = {}
    if args.nbar:
        params["nbar"] = args.nbar
    for key, attr in (("g", "g"), ("theta", "theta"), ("freq_ghz", "freq_ghz"), ("threshold", "threshold")):
        value = getattr(args, attr)
        if value is not None:
            params[key] = value
    return params


def _params_verify(args):
    return {"criteria": args.criteria} if args.criteria else {}


PARAM_BUILDERS = {
    "ift": _params_classical,
    "jarzynski": _params_classical,
    "gift": _params_demon,
    "demon": _params_demon,
    "quantum": _params_quantum,
    "engine": _params_engine,
    "zeno-sweep": _params_sweep,
    "gate-cost": _params_gate,
    "verify": _params_verify,
}


def _global_flags(defaults: bool) -> argparse.ArgumentParser:
    # shared by the top-level parser and every subcommand; SUPPRESS lets either position win
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=d(None), help="master seed (default 0)")
    g.add_argument("--workers", type=int, default=d(None), help="worker threads (fallback $QTHERMO_WORKERS, then 1)")
    g.add_argument("--out", default=d(None), help="result file; a manifest is written next to it")
    g.add_argument("--format", choices=("csv", "json"), default=d(None), help="result format (default csv)")
    g.add_argument("--si", action="store_true", default=d(False), help="physical units at the output boundary")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qthermo",
        description="Stochastic and quantum thermodynamics experiments.",
        parents=[_global_flags(True)],
    )
    parser.add_argument("--version", action="version", version=f"qthermo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _global_flags(False)

    def add(name, help_text):
        return sub.add_parser(name, help=help_text, parents=[common])

    for name in ("ift", "jarzynski"):
        p = add(name, f"{name} fluctuation theorem on a protocol")
        p.add_argument("--protocol", help="protocol JSON file")
        p.add_argument("--bundled", help="name of a packaged protocol")
        p.add_argument("-n", "--samples", type=int, dest="n", help="Monte Carlo samples (default 100000)")
        p.add_argument("--enumerate", dest="enumerate", action="store_true", default=None, help="require exact enumeration")
        p.add_argument("--no-enumerate", dest="enumerate", action="store_false", help="skip the exact row")

    for name in ("gift", "demon"):
        p = add(name, "noisy-measurement demon" if name == "demon" else "per-path information fluctuation table")
        p.add_argument("--config", help="demon JSON document")
        p.add_argument("--error-rate", type=float)
        p.add_argument("--input-bias", type=float)
        p.add_argument("--feedback", choices=("reset", "identity"))
        p.add_argument("--temp", type=float, help="temperature (kelvin with --si)")

    p = add("quantum", "sample and enumerate measured qubit trajectories")
    p.add_argument("--config", required=True, help="trajectory JSON document")
    p.add_argument("-n", "--samples", type=int, dest="n", help="sampled trajectories (default 100000)")

    p = add("engine", "Monte Carlo run of the measurement-driven engine")
    p.add_argument("--omega0", type=float)
    p.add_argument("--omega-rabi", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--temp", type=float, help="memory temperature (kelvin with --si)")
    p.add_argument("--cycles", type=int)

    p = add("zeno-sweep", "exact engine efficiency and power over drive durations")
    p.add_argument("--omega0", type=float)
    p.add_argument("--omega-rabi", type=float)
    p.add_argument("--temp", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--tau-min", type=float)
    p.add_argument("--tau-max", type=float)
    p.add_argument("--tau-grid", type=float, nargs="+")

    p = add("gate-cost", "fidelity and energy of a field-driven qubit rotation")
    p.add_argument("--nbar", type=float, nargs="+", help="mean photon numbers")
    p.add_argument("--g", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--freq-ghz", type=float)
    p.add_argument("--threshold", type=float, help="also report the smallest n_bar reaching this fidelity")

    p = add("verify", "run the acceptance suite")
    p.add_argument("--criteria", type=int, nargs="+", help="subset of criteria (1-10)")

    p = add("run", "run a full experiment document")
    p.add_argument("config", help="experiment JSON file")
    return parser


def config_from_args(args) -> ExperimentConfig:
    if args.command == "run":
        doc = _read_json(args.config)
        if isinstance(doc, dict):
            if args.seed is not None:
                doc["seed"] = args.seed
            if args.si:
                doc["si"] = True
            if args.out is not None or args.format is not None:
                out = dict(doc.get("output", {}))
                if args.out is not None:
                    out["path"] = args.out
                if args.format is not None:
                    out["format"] = args.format
                doc["output"] = out
        return parse_config(doc)
    doc: Dict[str, Any] = {"kind": args.command, "params": PARAM_BUILDERS[args.command](args)}
    if args.seed is not None:
        doc["seed"] = args.seed
    if getattr(args, "n", None) is not None:
        doc["n"] = args.n
    if args.si:
        doc["si"] = True
    doc["output"] = {"path": args.out, "format": args.format or "csv"}
    return parse_config(doc)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        if args.workers is not None and args.workers < 1:
            raise ConfigError([f"--workers must be >= 1, got {args.workers}"])
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_INVALID
    return execute(cfg, workers=args.workers)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
