"""Discrete-time classical stochastic thermodynamics.

A protocol alternates *drive* steps, which relabel the energy of every
micro-state while the state stays put, and *bath* steps, which make the
state jump according to a column-stochastic kernel ``K[target, source]``.
Work is collected on drive steps and heat on bath steps, so the first law
holds per trajectory by construction.

Entropies are in nats; energies and temperatures share one unit (k_B = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import _parallel
from .errors import ConfigurationError, DomainError

STOCHASTIC_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EnergyLandscape:
    """Energy of each micro-state."""

    energies: np.ndarray

    def __post_init__(self):
        e = _readonly(self.energies)
        if e.ndim != 1 or e.size < 2:
            raise ConfigurationError("an energy landscape needs at least 2 micro-states")
        if not np.all(np.isfinite(e)):
            raise ConfigurationError("energies must be finite")
        object.__setattr__(self, "energies", e)

    @property
    def n_states(self) -> int:
        return self.energies.size


@dataclass(frozen=True)
class TransitionKernel:
    """Conditional jump probabilities, ``matrix[i, j] = P[i | j]``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _readonly(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigurationError(f"kernel must be square, got shape {m.shape}")
        if np.any(m < 0.0) or np.any(m > 1.0):
            raise ConfigurationError("kernel entries must lie in [0, 1]")
        sums = m.sum(axis=0)
        bad = np.flatnonzero(np.abs(sums - 1.0) > STOCHASTIC_TOL)
        if bad.size:
            raise ConfigurationError(
                f"kernel columns {bad.tolist()} do not sum to 1 (sums {sums[bad].tolist()})"
            )
        object.__setattr__(self, "matrix", m)

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    def compose(self, other: "TransitionKernel") -> "TransitionKernel":
        """Kernel of ``other`` followed by ``self``."""
        m = self.matrix @ other.matrix
        # renormalise away roundoff so the composite stays within tolerance
        return TransitionKernel(m / m.sum(axis=0, keepdims=True))


@dataclass(frozen=True)
class Drive:
    landscape: EnergyLandscape


@dataclass(frozen=True)
class Bath:
    kernel: TransitionKernel


Step = Union[Drive, Bath]


@dataclass(frozen=True)
class Protocol:
    initial_landscape: EnergyLandscape
    steps: Tuple[Step, ...]
    bath_temperature: Optional[float] = None

    def __post_init__(self):
        steps = tuple(self.steps)
        object.__setattr__(self, "steps", steps)
        if not steps:
            raise ConfigurationError("a protocol needs at least one step")
        n = self.initial_landscape.n_states
        for k, step in enumerate(steps):
            if isinstance(step, Drive):
                size = step.landscape.n_states
            elif isinstance(step, Bath):
                size = step.kernel.n_states
            else:
                raise ConfigurationError(f"step {k} is neither Drive nor Bath: {step!r}")
            if size != n:
                raise ConfigurationError(f"step {k} has {size} states, protocol has {n}")
        if self.bath_temperature is not None and not self.bath_temperature > 0:
            raise ConfigurationError("bath_temperature must be positive")

    @property
    def n_states(self) -> int:
        return self.initial_landscape.n_states

    @property
    def n_bath_steps(self) -> int:
        return sum(isinstance(s, Bath) for s in self.steps)

    @property
    def n_checkpoints(self) -> int:
        return self.n_bath_steps + 1

    @property
    def final_landscape(self) -> EnergyLandscape:
        landscape = self.initial_landscape
        for step in self.steps:
            if isinstance(step, Drive):
                landscape = step.landscape
        return landscape

    def kernels(self) -> List[TransitionKernel]:
        return [s.kernel for s in self.steps if isinstance(s, Bath)]


@dataclass(frozen=True)
class TrajectoryLedger:
    """Thermodynamic bookkeeping of one trajectory (energies natural, entropies nats)."""

    work: float
    heat: float
    delta_energy: float
    delta_stochastic_entropy: float
    entropy_production: float
    backward_probability_zero: bool


@dataclass(frozen=True)
class LedgerArrays:
    """Column-wise ledgers for many trajectories at once."""

    work: np.ndarray
    heat: np.ndarray
    delta_energy: np.ndarray
    delta_stochastic_entropy: np.ndarray
    entropy_production: np.ndarray
    backward_probability_zero: np.ndarray

    def __len__(self):
        return self.work.size

    def row(self, i: int) -> TrajectoryLedger:
        return TrajectoryLedger(
            float(self.work[i]),
            float(self.heat[i]),
            float(self.delta_energy[i]),
            float(self.delta_stochastic_entropy[i]),
            float(self.entropy_production[i]),
            bool(self.backward_probability_zero[i]),
        )


# --------------------------------------------------------------------------
# Distributions and thermal objects


def distribution(p: Sequence[float]) -> np.ndarray:
    """Validate a probability vector and return a read-only float array."""
    a = np.asarray(p, dtype=float)
    if a.ndim != 1:
        raise DomainError("a distribution is a 1-D sequence")
    if np.any(a < 0.0) or np.any(a > 1.0):
        raise DomainError("probabilities must lie in [0, 1]")
    if abs(a.sum() - 1.0) > STOCHASTIC_TOL:
        raise DomainError(f"probabilities sum to {a.sum()!r}, not 1")
    return _readonly(a)


def _check_temperature(T: float) -> None:
    if not T > 0:
        raise DomainError(f"temperature must be positive, got {T}")


def _as_energies(landscape) -> np.ndarray:
    if isinstance(landscape, EnergyLandscape):
        return landscape.energies
    return EnergyLandscape(landscape).energies


def boltzmann_distribution(landscape, T: float) -> np.ndarray:
    _check_temperature(T)
    e = _as_energies(landscape)
    x = -(e - e.min()) / T
    w = np.exp(x)
    return _readonly(w / w.sum())


def free_energy(landscape, T: float) -> float:
    """``-T ln Z``, evaluated with a shifted exponent to avoid overflow."""
    _check_temperature(T)
    e = _as_energies(landscape)
    e0 = e.min()
    return float(e0 - T * math.log(np.exp(-(e - e0) / T).sum()))


def metropolis_kernel(landscape, T: float) -> TransitionKernel:
    """Metropolis kernel with a uniform proposal over the other states."""
    _check_temperature(T)
    e = _as_energies(landscape)
    n = e.size
    de = e[:, None] - e[None, :]  # de[i, j] = E_i - E_j, a move j -> i
    accept = np.exp(-np.clip(de, 0.0, None) / T)
    m = accept / (n - 1)
    np.fill_diagonal(m, 0.0)
    np.fill_diagonal(m, 1.0 - m.sum(axis=0))
    return TransitionKernel(m)


def heat_bath_kernel(landscape, T: float) -> TransitionKernel:
    """Full thermalisation: every column is the Boltzmann distribution.

    Strictly positive and in detailed balance, which makes it the kernel of
    choice when a protocol needs no zero transition probabilities.
    """
    p = boltzmann_distribution(landscape, T)
    return TransitionKernel(np.tile(p[:, None], (1, p.size)))


def detailed_balance_residual(kernel: TransitionKernel, p: np.ndarray) -> float:
    """Max over (i, j) of ``|p_j K[i|j] - p_i K[j|i]|``."""
    flux = kernel.matrix * np.asarray(p)[None, :]
    return float(np.abs(flux - flux.T).max())


def kl_to_equilibrium(p: Sequence[float], p_eq: Sequence[float]) -> float:
    """Relative entropy ``sum p ln(p / p_eq)`` in nats, with ``0 ln 0 = 0``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(p_eq, dtype=float)
    if p.shape != q.shape:
        raise DomainError("distributions have different sizes")
    support = p > 0
    if np.any(q[support] <= 0):
        raise DomainError(
            "p has mass where the equilibrium distribution vanishes "
            "(absolutely irreversible relaxation)"
        )
    return float(np.sum(p[support] * (np.log(p[support]) - np.log(q[support]))))


# --------------------------------------------------------------------------
# Dynamics


def evolve_distribution(protocol: Protocol, initial) -> List[np.ndarray]:
    """Exact marginal at every checkpoint (initial state, then after each bath step)."""
    p = np.asarray(initial, dtype=float)
    if p.shape != (protocol.n_states,):
        raise ConfigurationError(
            f"initial distribution has {p.size} entries, protocol has {protocol.n_states} states"
        )
    out = [_readonly(p)]
    for kernel in protocol.kernels():
        p = kernel.matrix @ p
        out.append(_readonly(p))
    return out


def pushforward(protocol: Protocol, initial) -> np.ndarray:
    return evolve_distribution(protocol, initial)[-1]


def _inverse_cdf_table(probs: np.ndarray, axis: int = 0) -> np.ndarray:
    """Cumulative table safe for ``searchsorted``-style draws.

    Entries from the last positive-probability index on are pinned to 1 so that
    a uniform draw in [0, 1) can never land on a trailing zero-probability state.
    """
    cdf = np.cumsum(probs, axis=axis)
    cdf = np.moveaxis(cdf, axis, -1).copy()
    p = np.moveaxis(probs, axis, -1)
    for idx in np.ndindex(cdf.shape[:-1]):
        last = np.flatnonzero(p[idx] > 0)[-1]
        cdf[idx][last:] = 1.0
    return cdf


def _draw(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    # state i is chosen when cdf[i-1] <= u < cdf[i]
    return (u[:, None] >= cdf_rows).sum(axis=1)


def sample_trajectories(
    protocol: Protocol,
    initial,
    n: int,
    seed: int,
    workers: Optional[int] = None,
    chunk_size: int = _parallel.CHUNK_SIZE,
) -> np.ndarray:
    """Draw ``n`` trajectories as an ``(n, n_checkpoints)`` integer array.

    Row ``r`` depends only on ``(seed, r // chunk_size)``, never on ``workers``.
    """
    p0 = distribution(initial)
    if p0.size != protocol.n_states:
        raise ConfigurationError(
            f"initial distribution has {p0.size} entries, protocol has {protocol.n_states} states"
        )
    init_cdf = _inverse_cdf_table(p0[:, None], axis=0)[0]
    kernel_cdfs = [_inverse_cdf_table(k.matrix, axis=0) for k in protocol.kernels()]
    n_cp = protocol.n_checkpoints

    def work(chunk, start, stop):
        rng = _parallel.chunk_rng(seed, chunk)
        u = rng.random((stop - start, n_cp))
        states = np.empty((stop - start, n_cp), dtype=np.int64)
        states[:, 0] = _draw(init_cdf[None, :], u[:, 0])
        for k, cdf in enumerate(kernel_cdfs):
            states[:, k + 1] = _draw(cdf[states[:, k]], u[:, k + 1])
        return states

    if n <= 0:
        return np.empty((0, n_cp), dtype=np.int64)
    return np.concatenate(_parallel.map_chunks(work, n, workers, chunk_size), axis=0)


def sample_trajectory(protocol: Protocol, initial, seed: int) -> np.ndarray:
    """One trajectory; identical to row 0 of ``sample_trajectories`` with the same seed."""
    return sample_trajectories(protocol, initial, 1, seed)[0]


# --------------------------------------------------------------------------
# Ledgers


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def ledger(protocol: Protocol, trajectory: Sequence[int], p0, p1) -> TrajectoryLedger:
    """Energy and entropy bookkeeping of a single trajectory.

    ``p1`` is the distribution the backward experiment starts from. For the
    fluctuation theorem to hold it must be normalised; the pushforward of
    ``p0`` (see :func:`pushforward`) is the usual choice, the final Boltzmann
    distribution gives Jarzynski's protocol.
    """
    states = [int(s) for s in trajectory]
    if len(states) != protocol.n_checkpoints:
        raise ConfigurationError(
            f"trajectory has {len(states)} checkpoints, protocol needs {protocol.n_checkpoints}"
        )
    n = protocol.n_states
    if any(s < 0 or s >= n for s in states):
        raise ConfigurationError(f"trajectory {states} has states outside [0, {n})")
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)

    energies = protocol.initial_landscape.energies
    k = 0
    work = heat = conditional = 0.0
    reverse_zero = False
    for step in protocol.steps:
        s = states[k]
        if isinstance(step, Drive):
            work += step.landscape.energies[s] - energies[s]
            energies = step.landscape.energies
        else:
            nxt = states[k + 1]
            heat += energies[nxt] - energies[s]
            fwd = step.kernel.matrix[nxt, s]
            bwd = step.kernel.matrix[s, nxt]
            if bwd == 0.0:
                reverse_zero = True
            elif fwd > 0.0:
                conditional += math.log(fwd) - math.log(bwd)
            else:
                conditional = -math.inf
            k += 1
    first, last = states[0], states[-1]
    delta_energy = energies[last] - protocol.initial_landscape.energies[first]

    lp0 = _log(p0[first])
    lp1 = _log(p1[last])
    ds = lp0 - lp1 if math.isfinite(lp1) else math.inf
    zero = reverse_zero or p1[last] == 0.0
    sigma = math.inf if zero else lp0 - lp1 + conditional
    return TrajectoryLedger(
        work=float(work),
        heat=float(heat),
        delta_energy=float(delta_energy),
        delta_stochastic_entropy=float(ds),
        entropy_production=float(sigma),
        backward_probability_zero=bool(zero),
    )


def ledger_batch(protocol: Protocol, trajectories: np.ndarray, p0, p1) -> LedgerArrays:
    """Vectorised :func:`ledger` over the rows of ``trajectories``."""
    traj = np.asarray(trajectories, dtype=np.int64)
    if traj.ndim != 2 or traj.shape[1] != protocol.n_checkpoints:
        raise ConfigurationError(
            f"trajectory array shape {traj.shape} does not match "
            f"{protocol.n_checkpoints} checkpoints"
        )
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    rows = traj.shape[0]
    energies = protocol.initial_landscape.energies
    work = np.zeros(rows)
    heat = np.zeros(rows)
    conditional = np.zeros(rows)
    reverse_zero = np.zeros(rows, dtype=bool)
    k = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        for step in protocol.steps:
            s = traj[:, k]
            if isinstance(step, Drive):
                work += step.landscape.energies[s] - energies[s]
                energies = step.landscape.energies
            else:
                nxt = traj[:, k + 1]
                heat += energies[nxt] - energies[s]
                m = step.kernel.matrix
                fwd = m[nxt, s]
                bwd = m[s, nxt]
                reverse_zero |= bwd == 0.0
                term = np.where(bwd == 0.0, 0.0, np.log(fwd) - np.log(np.where(bwd == 0.0, 1.0, bwd)))
                conditional += term
                k += 1
        first, last = traj[:, 0], traj[:, -1]
        delta_energy = energies[last] - protocol.initial_landscape.energies[first]
        lp0 = np.log(p0[first])
        lp1 = np.log(p1[last])
        ds = np.where(np.isfinite(lp1), lp0 - lp1, np.inf)
        zero = reverse_zero | (p1[last] == 0.0)
        sigma = np.where(zero, np.inf, lp0 - np.where(zero, 0.0, lp1) + conditional)
    return LedgerArrays(work, heat, delta_energy, ds, sigma, zero)


def relaxation_entropy_production(p0, p1, p_eq, source: int, target: int) -> float:
    """Entropy production of a single bath jump written against the equilibrium.

    ``ln(p0(source)/p_eq(source)) - ln(p1(target)/p_eq(target))``; equal to the
    boundary-plus-conditional form whenever the kernel is in detailed balance
    with ``p_eq``.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    q = np.asarray(p_eq, dtype=float)
    return float(
        (math.log(p0[source]) - math.log(q[source])) - (math.log(p1[target]) - math.log(q[target]))
    )


def quasi_static_protocol(
    start,
    end,
    n_substeps: int,
    T: float,
    kernel: str = "metropolis",
) -> Protocol:
    """Linear interpolation from ``start`` to ``end`` in ``n_substeps`` drives.

    Every drive is followed by a bath step built at the new landscape.
    """
    if n_substeps < 1:
        raise ConfigurationError("n_substeps must be >= 1")
    make = {"metropolis": metropolis_kernel, "heat_bath": heat_bath_kernel}[kernel]
    a = np.asarray(start, dtype=float)
    b = np.asarray(end, dtype=float)
    steps: List[Step] = []
    for k in range(1, n_substeps + 1):
        land = EnergyLandscape(a + (b - a) * k / n_substeps)
        steps.append(Drive(land))
        steps.append(Bath(make(land, T)))
    return Protocol(EnergyLandscape(a), tuple(steps), bath_temperature=T)
