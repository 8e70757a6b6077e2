"""Measurement-fuelled qubit engine stabilised by feedback.

One cycle, starting from ``|+>``:

1. drive for a time ``tau`` at Rabi frequency ``omega_rabi`` (work leaves the qubit);
2. measure in ``{|+>, |->}``; the collapse restores ``<H> = omega0/2`` (quantum heat);
3. on outcome ``-`` apply the energy-degenerate flip ``|-> -> |+>`` (free);
4. erase the one-bit memory at temperature ``T`` (Landauer cost ``T ln2 H[p_minus]``).

The drive turns the Bloch vector *away* from the absorbing direction, i.e.
``rabi_propagator(-omega_rabi, tau)``, so ``|+>`` evolves to
``cos(x/2)|+> - sin(x/2)|->`` with ``x = omega_rabi * tau`` and the qubit
loses ``(omega0/2) sin x`` per cycle.
"""

from __future__ import annotations

import math
from functools import cached_property
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .demon import landauer_cost
from .errors import ConfigurationError
from .fluctuation import batch_means
from .quantum import (
    PLUS,
    X_BASIS,
    born_probabilities,
    expected_energy,
    fix_phase,
    projective_measure,
    rabi_propagator,
)

# sigma_z: swaps |+> and |-> up to a global phase, leaves <H> unchanged
FEEDBACK_UNITARY = np.diag([1.0, -1.0]).astype(complex)
DRIVE_SIGN = -1.0


@dataclass(frozen=True)
class EngineConfig:
    omega0: float = 1.0
    omega_rabi: float = 1.0
    tau: float = math.pi / 2
    memory_temperature: float = 0.1
    n_cycles: int = 100_000
    seed: int = 0

    def __post_init__(self):
        for name in ("omega0", "omega_rabi", "tau", "memory_temperature"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_cycles < 1:
            raise ConfigurationError(f"n_cycles must be >= 1, got {self.n_cycles}")
        if self.seed < 0:
            raise ConfigurationError("seed must be non-negative")
        if not 0 < self.omega_tau < math.pi:
            raise ConfigurationError(f"omega_rabi * tau = {self.omega_tau} must lie in (0, pi)")

    @property
    def omega_tau(self) -> float:
        return self.omega_rabi * self.tau

    @cached_property
    def drive(self) -> np.ndarray:
        return rabi_propagator(DRIVE_SIGN * self.omega_rabi, self.tau)

    def with_tau(self, tau: float) -> "EngineConfig":
        return EngineConfig(self.omega0, self.omega_rabi, tau, self.memory_temperature, self.n_cycles, self.seed)


@dataclass(frozen=True)
class CycleRecord:
    work_extracted: float
    quantum_heat: float
    feedback_work: float
    landauer_cost: float
    outcome: str  # "+" or "-"


def minus_probability(config: EngineConfig) -> float:
    return math.sin(0.5 * config.omega_tau) ** 2


def run_cycle(
    config: EngineConfig,
    rng: np.random.Generator,
    state: np.ndarray = PLUS,
    forced_outcome: Optional[str] = None,
) -> CycleRecord:
    """Run the four strokes once; the qubit must enter in ``|+>``."""
    omega0 = config.omega0
    e_start = expected_energy(state, omega0)
    driven = fix_phase(config.drive @ state)
    e_driven = expected_energy(driven, omega0)
    if forced_outcome is None:
        meas = projective_measure(driven, X_BASIS, omega0, rng)
        k, post = meas.outcome, meas.post_state
    else:
        k = {"+": 0, "-": 1}[forced_outcome]
        post = X_BASIS.state(k)
    e_measured = expected_energy(post, omega0)
    if k == 1:
        post = fix_phase(FEEDBACK_UNITARY @ post)
    feedback_work = expected_energy(post, omega0) - e_measured
    erase = landauer_cost(minus_probability(config), config.memory_temperature)
    return CycleRecord(
        work_extracted=e_start - e_driven,
        quantum_heat=e_measured - e_driven,
        feedback_work=feedback_work,
        landauer_cost=erase,
        outcome="+-"[k],
    )


@dataclass(frozen=True)
class EnginePerformance:
    mean_work: float
    mean_quantum_heat: float
    mean_landauer: float
    eta: Optional[float]
    power: float
    outcome_minus_fraction: float
    work_std_error: float = 0.0
    quantum_heat_std_error: float = 0.0
    minus_fraction_std_error: float = 0.0
    n_cycles: int = 1


def _performance(work, qheat, landauer, minus, tau, n_cycles, errors=None) -> EnginePerformance:
    eta = float(1.0 - landauer / qheat) if qheat > 0 else None
    errors = errors or (0.0, 0.0, 0.0)
    return EnginePerformance(
        mean_work=work,
        mean_quantum_heat=qheat,
        mean_landauer=landauer,
        eta=eta,
        power=float((work - landauer) / tau),
        outcome_minus_fraction=minus,
        work_std_error=errors[0],
        quantum_heat_std_error=errors[1],
        minus_fraction_std_error=errors[2],
        n_cycles=n_cycles,
    )


def run_engine(config: EngineConfig, forced_outcome: Optional[str] = None) -> EnginePerformance:
    """Sequential Monte Carlo run of ``n_cycles`` cycles from one seeded stream."""
    rng = np.random.default_rng(config.seed)
    n = config.n_cycles
    work = np.empty(n)
    qheat = np.empty(n)
    erase = np.empty(n)
    minus = np.empty(n)
    state = PLUS
    for i in range(n):
        rec = run_cycle(config, rng, state, forced_outcome)
        work[i] = rec.work_extracted
        qheat[i] = rec.quantum_heat
        erase[i] = rec.landauer_cost
        minus[i] = rec.outcome == "-"
    stats = [batch_means(a) for a in (work, qheat, minus)]
    return _performance(
        stats[0][0],
        stats[1][0],
        float(np.sum(erase) / n),
        stats[2][0],
        config.tau,
        n,
        errors=(stats[0][1], stats[1][1], stats[2][1]),
    )


@dataclass(frozen=True)
class SweepRow:
    omega_tau: float
    p_minus: float
    work: float
    quantum_heat: float
    landauer: float
    eta: Optional[float]
    power: float
    work_closed_form: float  # omega0 sin(omega_tau / 2), for comparison only


def exact_cycle(config: EngineConfig) -> SweepRow:
    """Average one cycle over both measurement outcomes exactly."""
    omega0 = config.omega0
    driven = fix_phase(config.drive @ PLUS)
    e_start = expected_energy(PLUS, omega0)
    e_driven = expected_energy(driven, omega0)
    p = born_probabilities(driven, X_BASIS)
    work = qheat = 0.0
    for k in (0, 1):
        work += p[k] * (e_start - e_driven)
        qheat += p[k] * (expected_energy(X_BASIS.state(k), omega0) - e_driven)
    erase = landauer_cost(float(p[1]), config.memory_temperature)
    perf = _performance(work, qheat, erase, float(p[1]), config.tau, 1)
    return SweepRow(
        omega_tau=config.omega_tau,
        p_minus=float(p[1]),
        work=float(work),
        quantum_heat=float(qheat),
        landauer=erase,
        eta=perf.eta,
        power=perf.power,
        work_closed_form=omega0 * math.sin(0.5 * config.omega_tau),
    )


def zeno_sweep(config: EngineConfig, tau_grid: Sequence[float]) -> List[SweepRow]:
    """Noise-free efficiency and power over a grid of drive durations."""
    grid = list(tau_grid)
    if not grid:
        raise ConfigurationError("tau grid is empty")
    return [exact_cycle(config.with_tau(t)) for t in grid]
