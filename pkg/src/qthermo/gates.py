"""Energetic cost of a single-qubit gate driven by a finite coherent field.

The qubit couples resonantly to one field mode (Jaynes-Cummings, interaction
picture, hbar = 1)::

    H = (g / 2) (a sigma_+ + a^dagger sigma_-)

so the block ``span{|1, n>, |0, n+1>}`` rotates by the Bloch angle
``g t sqrt(n + 1)``. Joint amplitudes are stored as ``psi[q, n]`` with
``q = 0`` the ground state. A coherent field ``|alpha>`` with
``alpha = i sqrt(n_bar)`` drives, in the large-field limit, exactly the real
rotation :func:`qthermo.quantum.rabi_propagator`; the residual qubit-field
entanglement is what limits the gate fidelity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .demon import landauer_cost
from .errors import CapacityError, DomainError
from .quantum import rabi_propagator
from .units import HBAR

LEAKAGE_TOL = 1e-10
MAX_FOCK = 200_000
DRIVE_PHASE = math.pi / 2
DEFAULT_FREQ_HZ = 6e9

_S = 1.0 / math.sqrt(2.0)
CARDINAL_STATES = (
    np.array([1, 0], dtype=complex),
    np.array([0, 1], dtype=complex),
    np.array([_S, _S], dtype=complex),
    np.array([_S, -_S], dtype=complex),
    np.array([_S, 1j * _S], dtype=complex),
    np.array([_S, -1j * _S], dtype=complex),
)


def poisson_leakage(n_bar: float, n_max: int) -> float:
    """Weight a coherent state of mean ``n_bar`` puts above ``|n_max>``."""
    if n_bar == 0:
        return 0.0
    return float(poisson.sf(n_max, n_bar))


def default_truncation(n_bar: float) -> int:
    """Smallest ``N >= ceil(n_bar + 8 sqrt(n_bar))`` with leakage below 1e-10.

    For large fields the 8-sigma rule alone suffices; for a few photons the
    Poisson tail is heavier and ``N`` is pushed up until the leakage bound holds.
    """
    if n_bar < 0:
        raise DomainError("mean photon number must be non-negative")
    n = max(1, math.ceil(n_bar + 8.0 * math.sqrt(n_bar)))
    while poisson_leakage(n_bar, n) >= LEAKAGE_TOL:
        n += 1
    return n


def coherent_state(n_bar: float, n_max: Optional[int] = None, phase: float = 0.0) -> np.ndarray:
    """Truncated coherent state ``|alpha>``, ``alpha = sqrt(n_bar) e^{i phase}``, renormalised."""
    if n_bar < 0:
        raise DomainError("mean photon number must be non-negative")
    if n_max is None:
        n_max = default_truncation(n_bar)
    if n_max < n_bar + 8.0 * math.sqrt(n_bar):
        raise CapacityError(f"N_max = {n_max} below n_bar + 8 sqrt(n_bar) = {n_bar + 8 * math.sqrt(n_bar):.1f}")
    if n_max > MAX_FOCK:
        raise CapacityError(f"N_max = {n_max} exceeds the Fock-space cap {MAX_FOCK}")
    leak = poisson_leakage(n_bar, n_max)
    if leak >= LEAKAGE_TOL:
        raise CapacityError(f"truncation at N_max = {n_max} leaks {leak:.2e} >= {LEAKAGE_TOL}")
    amps = np.zeros(n_max + 1, dtype=complex)
    if n_bar == 0:
        amps[0] = 1.0
        return amps
    n = np.arange(n_max + 1)
    log_mag = 0.5 * n * math.log(n_bar) - 0.5 * gammaln(n + 1) - 0.5 * n_bar
    amps = np.exp(log_mag) * np.exp(1j * phase * n)
    return amps / np.linalg.norm(amps)


def mean_photon_number(field: np.ndarray) -> float:
    p = np.abs(field) ** 2
    return float(np.dot(np.arange(p.size), p) / p.sum())


def product_state(qubit: np.ndarray, field: np.ndarray) -> np.ndarray:
    return np.outer(np.asarray(qubit, complex), np.asarray(field, complex))


def jc_evolve(joint: np.ndarray, g: float, t: float) -> np.ndarray:
    """Exact resonant Jaynes-Cummings evolution of ``joint[q, n]``.

    ``|0, 0>`` is invariant, and so is ``|1, N_max>`` whose partner lies
    outside the truncated space, which keeps the map exactly unitary.
    """
    if g < 0 or t < 0:
        raise DomainError("coupling and duration must be non-negative")
    psi = np.asarray(joint, dtype=complex)
    if psi.ndim != 2 or psi.shape[0] != 2:
        raise DomainError("joint state must have shape (2, N_max + 1)")
    n_max = psi.shape[1] - 1
    out = psi.copy()
    angle = g * t * np.sqrt(np.arange(1, n_max + 1))
    c = np.cos(0.5 * angle)
    s = np.sin(0.5 * angle)
    excited = psi[1, :n_max]  # |1, n>, n = 0..N-1
    ground = psi[0, 1:]  # |0, n+1>
    out[1, :n_max] = c * excited - 1j * s * ground
    out[0, 1:] = c * ground - 1j * s * excited
    return out


def reduced_qubit(joint: np.ndarray) -> np.ndarray:
    """Trace out the field."""
    return joint @ joint.conj().T


@dataclass(frozen=True)
class GateResult:
    fidelity: float
    mean_photons: float
    energy_joules: float
    target_rotation: float
    freq_hz: float = DEFAULT_FREQ_HZ


def gate_energy_cost(n_bar: float, omega_hz: float) -> float:
    """Field energy ``n_bar hbar 2 pi f`` in joules."""
    if n_bar < 0 or omega_hz <= 0:
        raise DomainError("need n_bar >= 0 and a positive frequency")
    return n_bar * HBAR * 2.0 * math.pi * omega_hz


def gate_fidelity(
    target_angle: float,
    n_bar: float,
    g: float = 1.0,
    freq_hz: float = DEFAULT_FREQ_HZ,
    pulse_time: Optional[float] = None,
    n_max: Optional[int] = None,
) -> GateResult:
    """Average fidelity of the field-driven rotation over the six cardinal states.

    The pulse lasts ``target_angle / (g sqrt(n_bar))`` unless ``pulse_time``
    overrides it.
    """
    if target_angle == 0 and pulse_time is None:
        return GateResult(1.0, float(n_bar), gate_energy_cost(n_bar, freq_hz), 0.0, freq_hz)
    if pulse_time is None:
        if n_bar <= 0 or g <= 0:
            raise DomainError("a non-trivial gate needs n_bar > 0 and g > 0")
        pulse_time = target_angle / (g * math.sqrt(n_bar))
    field = coherent_state(n_bar, n_max, phase=DRIVE_PHASE)
    target = rabi_propagator(1.0, target_angle)
    fids = []
    for psi in CARDINAL_STATES:
        rho = reduced_qubit(jc_evolve(product_state(psi, field), g, pulse_time))
        want = target @ psi
        fids.append(float(np.real(want.conj() @ rho @ want)))
    fidelity = float(np.clip(np.mean(fids), 0.0, 1.0))
    return GateResult(fidelity, float(n_bar), gate_energy_cost(n_bar, freq_hz), target_angle, freq_hz)


def photon_grid(n_min: float = 1.0, n_max: float = 1e5, per_decade: int = 40) -> np.ndarray:
    decades = math.log10(n_max / n_min)
    k = int(round(decades * per_decade))
    return np.unique(np.round(np.logspace(math.log10(n_min), math.log10(n_max), k + 1)))


def min_photons_for_fidelity(
    threshold: float,
    g: float = 1.0,
    theta: float = math.pi / 2,
    grid: Optional[Sequence[float]] = None,
) -> float:
    """Smallest grid photon number whose gate fidelity reaches ``threshold``.

    Bisection over a logarithmic grid; fidelity is taken to be monotone in
    ``n_bar``.
    """
    if not 0.5 < threshold < 1.0:
        raise DomainError(f"threshold must lie in (0.5, 1), got {threshold}")
    grid = photon_grid() if grid is None else np.asarray(sorted(grid), dtype=float)

    def ok(i):
        return gate_fidelity(theta, float(grid[i]), g).fidelity >= threshold

    if ok(0):
        return float(grid[0])
    if not ok(len(grid) - 1):
        raise CapacityError(f"fidelity {threshold} not reached by n_bar = {grid[-1]:g}")
    lo, hi = 0, len(grid) - 1  # ok(lo) false, ok(hi) true
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return float(grid[hi])


def infidelity_slope(
    n_bars: Sequence[float] = (25, 100, 400, 1600), theta: float = math.pi / 2, g: float = 1.0
) -> float:
    """Least-squares slope of ``log(1 - F)`` against ``log(n_bar)``."""
    x = np.log(np.asarray(n_bars, dtype=float))
    y = np.log([1.0 - gate_fidelity(theta, n, g).fidelity for n in n_bars])
    return float(np.polyfit(x, y, 1)[0])


def landauer_ratio(energy_joules: float, temperature_k: float = 300.0) -> float:
    """Gate energy over the cost of erasing one fair bit at ``temperature_k``."""
    return energy_joules / landauer_cost(0.5, temperature_k, si=True)


def fidelity_curve(n_bars: Sequence[float], theta: float = math.pi / 2, g: float = 1.0) -> List[GateResult]:
    return [gate_fidelity(theta, float(n), g) for n in n_bars]
