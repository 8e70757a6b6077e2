"""Numerical acceptance checks run by ``qthermo verify`` and the test suite.

Each check returns a :class:`CriterionResult` whose ``metrics`` hold the
measured numbers. Metrics depend only on the seed, never on the worker count
or wall-clock time; durations are kept separately in ``seconds``.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import load_protocol
from .demon import landauer_cost, run_demon, szilard_work_bound
from .engine import EngineConfig, exact_cycle, run_engine, zeno_sweep
from .fluctuation import (
    enumerate_exact,
    ift_estimate,
    jarzynski_enumeration,
    jarzynski_estimate,
    transfer_averages,
)
from .gates import gate_energy_cost, gate_fidelity, infidelity_slope, min_photons_for_fidelity
from .quantum import MeasurementBasis, entropy_production_protocol
from .stochastic import (
    Bath,
    Drive,
    EnergyLandscape,
    Protocol,
    TransitionKernel,
    boltzmann_distribution,
    free_energy,
    heat_bath_kernel,
    kl_to_equilibrium,
    metropolis_kernel,
    quasi_static_protocol,
    relaxation_entropy_production,
)

EXACT_TOL = 1e-10
N_SAMPLES = 100_000
QUASI_STATIC_STEPS = (1, 2, 5, 10, 20, 50)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    metrics: Dict[str, float] = field(default_factory=dict)
    detail: str = ""
    seconds: float = 0.0
    time_limit: Optional[float] = None


# --------------------------------------------------------------------------
# Bundled protocols


def bundled_protocols() -> Dict[str, Tuple[Protocol, np.ndarray]]:
    """Name -> (protocol, initial distribution) for every packaged protocol file."""
    root = resources.files("qthermo").joinpath("data/protocols")
    out = {}
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if not entry.name.endswith(".json"):
            continue
        doc = json.loads(entry.read_text())
        proto = load_protocol(doc)
        if "initial_distribution" in doc:
            p0 = np.asarray(doc["initial_distribution"], dtype=float)
        else:
            p0 = boltzmann_distribution(proto.initial_landscape, proto.bath_temperature)
        out[entry.name[: -len(".json")]] = (proto, p0)
    return out


# --------------------------------------------------------------------------
# Random instance generators


def random_detailed_balance_kernel(p_eq: np.ndarray, rng: np.random.Generator, sparsity: float = 0.0) -> TransitionKernel:
    """Column-stochastic kernel in detailed balance with ``p_eq``.

    Off-diagonal rates ``S_ji sqrt(p_j / p_i)`` with ``S`` symmetric satisfy
    ``p_i K_ji = p_j K_ij``; the diagonal absorbs the remainder.
    """
    n = p_eq.size
    s = rng.uniform(0.05, 1.0, (n, n))
    if sparsity > 0:
        s = s * (rng.random((n, n)) >= sparsity)
    s = np.triu(s, 1)
    s = s + s.T
    rates = s * np.sqrt(p_eq[:, None] / p_eq[None, :])
    scale = rates.sum(axis=0).max()
    if scale > 0:
        rates = rates / (scale * rng.uniform(1.0, 2.0))
    k = rates + np.diag(1.0 - rates.sum(axis=0))
    return TransitionKernel(k)


@dataclass(frozen=True)
class BalancedInstance:
    protocol: Protocol
    initial: np.ndarray
    temperature: float


def detailed_balance_instances(seed: int, count: int = 100, multi_step: bool = False) -> List[BalancedInstance]:
    """Random protocols (2 to 4 states) whose every bath obeys detailed balance.

    Single-step instances are one bath jump at a fixed landscape; multi-step
    ones interleave drives with thermal or random balanced kernels.
    """
    rng = np.random.default_rng([seed, 3, int(multi_step)])
    out = []
    for i in range(count):
        n = int(rng.integers(2, 5))
        T = float(rng.uniform(0.3, 3.0))
        land = EnergyLandscape(rng.uniform(-1.5, 1.5, n))
        p0 = rng.dirichlet(np.ones(n))
        if not multi_step:
            q = boltzmann_distribution(land, T)
            steps = (Bath(random_detailed_balance_kernel(q, rng, sparsity=0.3 * (i % 2))),)
        else:
            steps = []
            current = land
            for _ in range(int(rng.integers(1, 4))):
                current = EnergyLandscape(rng.uniform(-1.5, 1.5, n))
                steps.append(Drive(current))
                which = int(rng.integers(3))
                if which == 0:
                    steps.append(Bath(metropolis_kernel(current, T)))
                elif which == 1:
                    steps.append(Bath(heat_bath_kernel(current, T)))
                else:
                    steps.append(Bath(random_detailed_balance_kernel(boltzmann_distribution(current, T), rng)))
            steps = tuple(steps)
        out.append(BalancedInstance(Protocol(land, steps, bath_temperature=T), p0, T))
    return out


def haar_unitary(rng: np.random.Generator, n: int = 2) -> np.ndarray:
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


# --------------------------------------------------------------------------
# Criteria


def _timed(fn):
    def run(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        if res.time_limit is not None and res.seconds > res.time_limit:
            res.passed = False
            res.detail = (res.detail + "; " if res.detail else "") + f"runtime {res.seconds:.1f} s > {res.time_limit} s"
        return res

    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


@_timed
def check_ift(seed: int = 0, workers: Optional[int] = None) -> CriterionResult:
    """Integral fluctuation theorem on the bundled protocols, exact and sampled."""
    metrics: Dict[str, float] = {}
    ok = True
    protos = bundled_protocols()
    for i, (name, (proto, p0)) in enumerate(protos.items()):
        positive = all(np.all(k.matrix > 0) for k in proto.kernels())
        exact = enumerate_exact(proto, p0).mean_exp_minus_entropy_production
        mc = ift_estimate(proto, p0, N_SAMPLES, seed + i, workers=workers)
        metrics[f"{name}.exact"] = exact
        metrics[f"{name}.mc_mean"] = mc.mean
        metrics[f"{name}.mc_std_error"] = mc.std_error
        ok &= positive and abs(exact - 1.0) <= EXACT_TOL and mc.within(1.0)
    n2 = sum(p.n_states == 2 for p, _ in protos.values())
    n3 = sum(p.n_states == 3 for p, _ in protos.values())
    ok &= n2 >= 5 and n3 >= 2
    return CriterionResult(1, "integral fluctuation theorem", bool(ok), metrics, f"{n2} two-state, {n3} three-state", time_limit=10.0)


def quench_protocol() -> Protocol:
    land = EnergyLandscape([0.0, 1.0])
    return Protocol(EnergyLandscape([0.0, 0.0]), (Drive(land), Bath(metropolis_kernel(land, 1.0))), bath_temperature=1.0)


@_timed
def check_jarzynski(seed: int = 0, workers: Optional[int] = None) -> CriterionResult:
    """Jarzynski equality on a quench plus the quasi-static limit."""
    T = 1.0
    proto = quench_protocol()
    report = jarzynski_enumeration(proto, T)
    dF = free_energy([0.0, 1.0], T) - free_energy([0.0, 0.0], T)
    target = math.exp(-dF / T)
    mc, _ = jarzynski_estimate(proto, T, N_SAMPLES, seed, workers=workers)
    metrics = {
        "exp_minus_dF": target,
        "exact_mean_exp_minus_W": report.mean_exp_minus_work,
        "mc_mean_exp_minus_W": mc.mean,
        "mc_std_error": mc.std_error,
    }
    ok = abs(report.mean_exp_minus_work - target) <= 1e-12 and abs(target - 0.6839) < 5e-5 and mc.within(target)
    production = []
    for k in QUASI_STATIC_STEPS:
        qs = quasi_static_protocol([0.0, 0.0], [0.0, 1.0], k, T)
        avg = transfer_averages(qs, boltzmann_distribution(qs.initial_landscape, T), final=boltzmann_distribution(qs.final_landscape, T))
        metrics[f"quasi_static_{k}.mean_entropy_production"] = avg.mean_entropy_production
        production.append(avg.mean_entropy_production)
    ok &= production[-1] < 0.01 and all(b < a for a, b in zip(production, production[1:]))
    return CriterionResult(2, "Jarzynski equality", bool(ok), metrics)


@_timed
def check_relaxation_forms(seed: int = 0, workers: Optional[int] = None) -> CriterionResult:
    """Boundary-plus-conditional and equilibrium-relative entropy production agree."""
    worst_path = worst_mean = worst_monotone = 0.0
    for inst in detailed_balance_instances(seed):
        proto = inst.protocol
        q = boltzmann_distribution(proto.initial_landscape, inst.temperature)
        rep = enumerate_exact(proto, inst.initial)
        p1 = proto.kernels()[0].matrix @ inst.initial
        for traj, prob, led in rep.rows():
            if prob > 0:
                other = relaxation_entropy_production(inst.initial, p1, q, traj[0], traj[-1])
                worst_path = max(worst_path, abs(led.entropy_production - other))
        d0 = kl_to_equilibrium(inst.initial, q)
        d1 = kl_to_equilibrium(p1, q)
        worst_mean = max(worst_mean, abs(rep.mean_entropy_production - (d0 - d1)))
        p = inst.initial
        d_prev = d0
        for _ in range(5):
            p = proto.kernels()[0].matrix @ p
            d = kl_to_equilibrium(p, q)
            worst_monotone = max(worst_monotone, d - d_prev)
            d_prev = d
    metrics = {
        "max_path_difference": worst_path,
        "max_mean_vs_distance_drop": worst_mean,
        "max_distance_increase": worst_monotone,
    }
    ok = worst_path <= EXACT_TOL and worst_mean <= EXACT_TOL and worst_monotone <= 1e-12
    return CriterionResult(3, "relaxation entropy production", bool(ok), metrics, "100 instances")


@_timed
def check_thermal_decomposition(seed: int = 0, workers: Optional[int] = None) -> CriterionResult:
    """Entropy production equals stochastic entropy change minus heat over T."""
    worst = 0.0
    count = 0
    for multi in (False, True):
        for inst in detailed_balance_instances(seed, multi_step=multi):
            rep = enumerate_exact(inst.protocol, inst.initial)
            live = rep.probabilities > 0
            led = rep.ledgers
            diff = led.entropy_production - (led.delta_stochastic_entropy - led.heat / inst.temperature)
            worst = max(worst, float(np.max(np.abs(diff[live]))))
            count += 1
    return CriterionResult(4, "thermal decomposition", worst <= EXACT_TOL, {"max_difference": worst}, f"{count} instances")


@_timed
def check_gift(seed: int = 0, workers: Optional[int] = None) -> CriterionResult:
    """Fluctuation theorem with information for the noisy reset demon."""
    metrics: Dict[str, float] = {}
    ok = True
    for eps in (0.0, 0.1, 0.3):
        res = run_demon(eps, 0.5)
        dS, dI = res.ledger.delta_S_bits, res.ledger.delta_I_bits
        metrics[f"eps_{eps}.exp_mean"] = res.ift_mean
        metrics[f"eps_{eps}.dS_bits"] = dS
        metrics[f"eps_{eps}.dI_bits"] = dI
        ok &= abs(res.ift_mean - 1.0) <= EXACT_TOL and dS >= dI - EXACT_TOL
        if eps == 0.0:
            ok &= abs(dS - dI) <= EXACT_TOL
    return CriterionResult(5, "fluctuation theorem with information", bool(ok), metrics)


@_timed
def check_landauer(seed: int = 0, workers: Optional[int] = None) -> CriterionResult:
    """Landauer cost anchor and the Szilard bound."""
    cost = landauer_cost(0.5, 300.0, si=True)
    ok = abs(cost / 2.871e-21 - 1.0) <= 1e-3
    T = 1.0
    grid = np.linspace(0.0, 1.0, 1001)
    bound = szilard_work_bound(T)
    gaps = np.array([bound - landauer_cost(float(p), T) for p in grid])
    equal = np.abs(gaps) <= 1e-12 * bound
    ok &= bool(np.all(gaps >= -1e-12 * bound)) and np.flatnonzero(equal).tolist() == [500]
    metrics = {"landauer_300K_J": cost, "min_gap_off_half": float(np.min(gaps[~equal]))}
    return CriterionResult(6, "Landauer and Szilard anchors", bool(ok), metrics)


@_timed
def check_measurement_entropy(seed: int = 0, workers: Optional[int] = None) -> CriterionResult:
    """Mean measurement entropy production equals the von Neumann entropy change."""
    rng = np.random.default_rng([seed, 7])
    worst = 0.0
    iff_ok = True
    n_free = 0
    for i in range(200):
        v = haar_unitary(rng)
        basis = MeasurementBasis(v)
        j = int(rng.integers(2))
        if i % 10 == 0:
            # coherence-free: a diagonal phase or a swap in the measured basis
            if i % 20 == 0:
                inner = np.diag(np.exp(1j * rng.uniform(0, 2 * math.pi, 2)))
            else:
                inner = np.array([[0, 1], [1, 0]], dtype=complex)
            U = v @ inner @ v.conj().T
        else:
            U = haar_unitary(rng)
        rep = entropy_production_protocol(basis.state(j), U, basis)
        worst = max(worst, abs(rep.mean_entropy_production - rep.von_neumann_change))
        coherent = float(np.min(rep.outcome_probabilities)) > 1e-12
        vanishes = abs(rep.mean_entropy_production) <= 1e-12
        iff_ok &= coherent != vanishes
        n_free += not coherent
    metrics = {"max_difference": worst, "coherence_free_cases": float(n_free)}
    return CriterionResult(7, "measurement entropy production", bool(worst <= EXACT_TOL and iff_ok), metrics, "200 triples")


def engine_grid() -> np.ndarray:
    """20 points in ``(0.01, pi/2]``."""
    return np.linspace(0.01, math.pi / 2, 21)[1:]


@_timed
def check_engine(seed: int = 0, workers: Optional[int] = None) -> CriterionResult:
    """Exact engine closure and the Zeno-regime optimum, cross-checked by sampling."""
    base = EngineConfig(omega0=1.0, omega_rabi=1.0, tau=math.pi / 2, memory_temperature=0.1, seed=seed)
    grid = engine_grid()
    rows = zeno_sweep(base, grid)
    zeno = exact_cycle(base.with_tau(0.01))
    closure = max(abs(r.work - r.quantum_heat) for r in rows + [zeno])
    etas = np.array([r.eta for r in rows])
    powers = np.array([r.power for r in rows])
    ok = closure <= EXACT_TOL and zeno.eta > 0.99
    ok &= bool(np.all(np.diff(etas) < 0)) and int(np.argmax(powers)) == 0
    exact = exact_cycle(base)
    mc = run_engine(base)
    floor = 1e-12
    ok &= abs(mc.mean_work - exact.work) <= 4 * mc.work_std_error + floor
    ok &= abs(mc.mean_quantum_heat - exact.quantum_heat) <= 4 * mc.quantum_heat_std_error + floor
    ok &= abs(mc.outcome_minus_fraction - exact.p_minus) <= 4 * mc.minus_fraction_std_error + floor
    metrics = {
        "max_closure": closure,
        "eta_at_0.01": zeno.eta,
        "eta_at_pi/2": exact.eta,
        "power_at_smallest": float(powers[0]),
        "mc_mean_work": mc.mean_work,
        "mc_minus_fraction": mc.outcome_minus_fraction,
        "mc_minus_fraction_std_error": mc.minus_fraction_std_error,
        "exact_minus_probability": exact.p_minus,
    }
    return CriterionResult(8, "feedback-stabilised engine", bool(ok), metrics, time_limit=30.0)


@_timed
def check_gate(seed: int = 0, workers: Optional[int] = None) -> CriterionResult:
    """Gate infidelity scaling and the photon energy anchor."""
    slope = infidelity_slope((25, 100, 400, 1600))
    f1000 = gate_fidelity(math.pi / 2, 1000.0).fidelity
    threshold = math.floor(f1000 * 1e4) / 1e4
    n_star = min_photons_for_fidelity(threshold)
    energy = gate_energy_cost(1000.0, 6e9)
    landauer = landauer_cost(0.5, 300.0, si=True)
    order = math.floor(math.log10(energy))
    ok = abs(slope + 1.0) <= 0.2 and 300 <= n_star <= 3000 and abs(energy / 3.97e-21 - 1.0) <= 5e-3
    ok &= order == -21 and order == math.floor(math.log10(landauer))
    metrics = {
        "infidelity_slope": slope,
        "fidelity_threshold": threshold,
        "n_star": n_star,
        "energy_1000_photons_J": energy,
        "energy_over_landauer_300K": energy / landauer,
    }
    return CriterionResult(9, "gate energetics", bool(ok), metrics, f"threshold {threshold} -> n* = {n_star:g}", time_limit=120.0)


@_timed
def check_determinism(seed: int = 0, workers: Optional[int] = None) -> CriterionResult:
    """Sampled estimators are identical for one and several workers."""
    proto, p0 = next(iter(bundled_protocols().values()))
    a = ift_estimate(proto, p0, N_SAMPLES, seed, workers=1)
    b = ift_estimate(proto, p0, N_SAMPLES, seed, workers=3)
    q = quench_protocol()
    c, _ = jarzynski_estimate(q, 1.0, N_SAMPLES, seed, workers=1)
    d, _ = jarzynski_estimate(q, 1.0, N_SAMPLES, seed, workers=4)
    same = (a.mean, a.std_error) == (b.mean, b.std_error) and (c.mean, c.std_error) == (d.mean, d.std_error)
    return CriterionResult(10, "worker-count determinism", same, {"identical": float(same)})


CHECKS: Dict[int, Callable[..., CriterionResult]] = {
    1: check_ift,
    2: check_jarzynski,
    3: check_relaxation_forms,
    4: check_thermal_decomposition,
    5: check_gift,
    6: check_landauer,
    7: check_measurement_entropy,
    8: check_engine,
    9: check_gate,
    10: check_determinism,
}


def run_all(seed: int = 0, workers: Optional[int] = None, criteria: Optional[Sequence[int]] = None) -> List[CriterionResult]:
    chosen = sorted(set(criteria)) if criteria else sorted(CHECKS)
    return [CHECKS[k](seed=seed, workers=workers) for k in chosen]


def summary_line(res: CriterionResult) -> str:
    status = "PASS" if res.passed else "FAIL"
    tail = f" ({res.detail})" if res.detail else ""
    return f"[{status}] criterion {res.number:2d}: {res.name}{tail} [{res.seconds:.2f} s]"
