"""Fluctuation-theorem estimators and the exact enumeration oracle.

Every Monte Carlo estimator here has an exact counterpart in
:func:`enumerate_exact`, which lists all ``n_states ** n_checkpoints``
trajectories with their forward probabilities.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from .errors import CapacityError, ConfigurationError
from .stochastic import (
    LedgerArrays,
    Protocol,
    TrajectoryLedger,
    boltzmann_distribution,
    distribution,
    free_energy,
    ledger_batch,
    pushforward,
    sample_trajectories,
)

ENUMERATION_CAP = 10**7
N_BATCHES = 32
SECOND_LAW_TOL = 1e-10


@dataclass(frozen=True)
class EstimatorResult:
    mean: float
    std_error: float
    n_samples: int
    absolute_irreversibility_fraction: float = 0.0

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be non-negative")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")

    @property
    def ift_verdict(self) -> str:
        """``"= 1"`` unless some sampled trajectories have no time reverse."""
        return "<= 1 expected" if self.absolute_irreversibility_fraction > 0 else "= 1"

    def within(self, target: float, n_sigma: float = 4.0, floor: float = 0.0) -> bool:
        return abs(self.mean - target) <= n_sigma * self.std_error + floor


def batch_means(values: np.ndarray, n_batches: int = N_BATCHES) -> Tuple[float, float]:
    """Mean and batch-means standard error of a sample.

    Samples are cut into ``n_batches`` contiguous batches of (nearly) equal
    size; the error is the standard deviation of the batch means over
    ``sqrt(n_batches)``. Batches are weighted by their size so the returned
    mean is the plain sample mean.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        raise ValueError("empty sample")
    mean = float(np.sum(values) / n)
    b = min(n_batches, n)
    if b < 2:
        return mean, 0.0
    batches = np.array_split(values, b)
    bm = np.array([np.sum(x) / x.size for x in batches])
    se = float(np.std(bm, ddof=1) / math.sqrt(b))
    return mean, se


@dataclass(frozen=True)
class EnumerationReport:
    """Every trajectory of a protocol with its exact forward probability."""

    trajectories: np.ndarray
    probabilities: np.ndarray
    ledgers: LedgerArrays
    temperature: Optional[float]

    def _weighted(self, values: np.ndarray) -> float:
        live = self.probabilities > 0
        return float(np.sum(self.probabilities[live] * values[live]))

    @property
    def mean_entropy_production(self) -> float:
        return self._weighted(self.ledgers.entropy_production)

    @property
    def mean_exp_minus_entropy_production(self) -> float:
        return self._weighted(np.exp(-self.ledgers.entropy_production))

    @property
    def mean_work(self) -> float:
        return self._weighted(self.ledgers.work)

    @property
    def mean_heat(self) -> float:
        return self._weighted(self.ledgers.heat)

    @property
    def mean_exp_minus_work(self) -> float:
        """``<exp(-W/T)>``; needs a temperature."""
        if self.temperature is None:
            raise ConfigurationError("report has no temperature for <exp(-W/T)>")
        return self._weighted(np.exp(-self.ledgers.work / self.temperature))

    @property
    def absolute_irreversibility_weight(self) -> float:
        """Forward probability carried by trajectories with no time reverse."""
        return self._weighted(self.ledgers.backward_probability_zero.astype(float))

    def rows(self) -> Iterator[Tuple[Tuple[int, ...], float, TrajectoryLedger]]:
        for i in range(self.probabilities.size):
            yield tuple(int(s) for s in self.trajectories[i]), float(self.probabilities[i]), self.ledgers.row(i)

    def __len__(self):
        return self.probabilities.size


def enumeration_size(protocol: Protocol) -> int:
    return protocol.n_states ** protocol.n_checkpoints


def forward_probabilities(protocol: Protocol, trajectories: np.ndarray, initial) -> np.ndarray:
    p0 = np.asarray(initial, dtype=float)
    prob = p0[trajectories[:, 0]].copy()
    for k, kernel in enumerate(protocol.kernels()):
        prob *= kernel.matrix[trajectories[:, k + 1], trajectories[:, k]]
    return prob


def enumerate_exact(
    protocol: Protocol,
    initial,
    final=None,
    temperature: Optional[float] = None,
) -> EnumerationReport:
    """Exhaustive trajectory table.

    ``final`` is the backward starting distribution and defaults to the exact
    pushforward of ``initial``. ``temperature`` defaults to the protocol's
    bath temperature and is only needed for ``<exp(-W/T)>``.
    """
    size = enumeration_size(protocol)
    if size > ENUMERATION_CAP:
        raise CapacityError(
            f"enumeration needs {protocol.n_states}^{protocol.n_checkpoints} = {size} rows, "
            f"cap is {ENUMERATION_CAP}"
        )
    p0 = distribution(initial)
    p1 = pushforward(protocol, p0) if final is None else distribution(final)
    trajectories = np.array(
        list(itertools.product(range(protocol.n_states), repeat=protocol.n_checkpoints)),
        dtype=np.int64,
    ).reshape(size, protocol.n_checkpoints)
    probs = forward_probabilities(protocol, trajectories, p0)
    ledgers = ledger_batch(protocol, trajectories, p0, p1)
    if temperature is None:
        temperature = protocol.bath_temperature
    return EnumerationReport(trajectories, probs, ledgers, temperature)


def _sampled_ledgers(protocol, p0, p1, n, seed, workers) -> LedgerArrays:
    traj = sample_trajectories(protocol, p0, n, seed, workers=workers)
    return ledger_batch(protocol, traj, p0, p1)


def ift_estimate(
    protocol: Protocol,
    initial,
    n: int,
    seed: int,
    final=None,
    workers: Optional[int] = None,
) -> EstimatorResult:
    """Monte Carlo ``<exp(-entropy production)>``.

    Trajectories without a time reverse contribute 0 and are counted in
    ``absolute_irreversibility_fraction``.
    """
    if n < 100:
        raise ConfigurationError(f"ift_estimate needs n >= 100, got {n}")
    p0 = distribution(initial)
    p1 = pushforward(protocol, p0) if final is None else distribution(final)
    led = _sampled_ledgers(protocol, p0, p1, n, seed, workers)
    values = np.exp(-led.entropy_production)  # +inf sentinel maps to 0
    mean, se = batch_means(values)
    frac = float(np.count_nonzero(led.backward_probability_zero) / n)
    return EstimatorResult(mean, se, n, frac)


def jarzynski_estimate(
    protocol: Protocol,
    T: float,
    n: int,
    seed: int,
    initial=None,
    workers: Optional[int] = None,
) -> Tuple[EstimatorResult, float]:
    """Monte Carlo ``<exp(-W/T)>`` and its target ``exp(-dF/T)``.

    The initial distribution is the Boltzmann distribution of the initial
    landscape; passing anything else raises :class:`ConfigurationError`.
    """
    if n < 100:
        raise ConfigurationError(f"jarzynski_estimate needs n >= 100, got {n}")
    p_eq = boltzmann_distribution(protocol.initial_landscape, T)
    if initial is not None and np.max(np.abs(np.asarray(initial, dtype=float) - p_eq)) > 1e-12:
        raise ConfigurationError("Jarzynski's protocol starts from the initial Boltzmann distribution")
    traj = sample_trajectories(protocol, p_eq, n, seed, workers=workers)
    work = ledger_batch(protocol, traj, p_eq, p_eq).work
    mean, se = batch_means(np.exp(-work / T))
    dF = free_energy(protocol.final_landscape, T) - free_energy(protocol.initial_landscape, T)
    return EstimatorResult(mean, se, n, 0.0), math.exp(-dF / T)


def jarzynski_enumeration(protocol: Protocol, T: float) -> EnumerationReport:
    """Enumeration under Jarzynski's protocol: thermal start, thermal backward start.

    With these boundaries the entropy production of each trajectory equals
    ``(W - dF)/T`` for detailed-balance baths.
    """
    p0 = boltzmann_distribution(protocol.initial_landscape, T)
    p1 = boltzmann_distribution(protocol.final_landscape, T)
    return enumerate_exact(protocol, p0, final=p1, temperature=T)


def second_law_check(report: EnumerationReport) -> Tuple[bool, float]:
    """``(mean entropy production >= -1e-10, mean entropy production)``."""
    margin = report.mean_entropy_production
    return margin >= -SECOND_LAW_TOL, margin


@dataclass(frozen=True)
class ExactAverages:
    """Exact path averages obtained by propagating state-resolved sums."""

    mean_entropy_production: float
    mean_exp_minus_entropy_production: float
    mean_work: float
    mean_heat: float
    mean_exp_minus_work: Optional[float]
    absolute_irreversibility_weight: float


def transfer_averages(
    protocol: Protocol,
    initial,
    final=None,
    temperature: Optional[float] = None,
) -> ExactAverages:
    """Same averages as :func:`enumerate_exact` at linear cost in the step count.

    Additive path functionals such as work or entropy production are carried as
    ``sum over paths ending in s of P_F * value``; the exponentials as
    ``sum over paths ending in s of P_F * exp(-value)``. No trajectory table is
    built, so there is no size cap.
    """
    p0 = distribution(initial)
    p1 = pushforward(protocol, p0) if final is None else distribution(final)
    if temperature is None:
        temperature = protocol.bath_temperature
    n = protocol.n_states

    prob = p0.copy()
    work = np.zeros(n)
    heat = np.zeros(n)
    cond = np.zeros(n)
    dead = np.zeros(n)  # forward weight of paths that already lost their reverse
    # P_B / P_F restricted to live paths, times P_F: starts at 1 on the support
    exp_sigma = (p0 > 0).astype(float)
    exp_work = p0.copy()
    energies = protocol.initial_landscape.energies
    with np.errstate(divide="ignore", invalid="ignore"):
        for step in protocol.steps:
            if hasattr(step, "landscape"):
                de = step.landscape.energies - energies
                work += prob * de
                if temperature is not None:
                    exp_work *= np.exp(-de / temperature)
                energies = step.landscape.energies
                continue
            m = step.kernel.matrix  # m[j, i] = P[j | i]
            rev = m.T  # rev[j, i] = P[i | j]
            flow = m * prob[None, :]  # flow[j, i] = P_F weight of the jump i -> j
            reachable = flow > 0
            log_ratio = np.where(reachable & (rev > 0), np.log(m) - np.log(np.where(rev > 0, rev, 1.0)), 0.0)
            live_flow = m * (prob - dead)[None, :]
            new_dead = (live_flow * (rev == 0)).sum(axis=1) + m @ dead
            cond = m @ cond + (flow * log_ratio).sum(axis=1)
            work = m @ work
            heat = m @ heat + (flow * (energies[:, None] - energies[None, :])).sum(axis=1)
            exp_sigma = (np.where(m > 0, rev, 0.0) * exp_sigma[None, :]).sum(axis=1)
            exp_work = m @ exp_work
            dead = new_dead
            prob = m @ prob
        dead_weight = float(dead.sum())
        live_final = prob > 0
        if dead_weight > 0 or np.any(live_final & (p1 == 0)):
            mean_sigma = math.inf
        else:
            boundary = float(np.sum(p0[p0 > 0] * np.log(p0[p0 > 0]))) - float(
                np.sum(prob[live_final] * np.log(p1[live_final]))
            )
            mean_sigma = boundary + float(cond.sum())
        dead_weight += float(np.sum((prob - dead)[p1 == 0]))  # live paths ending where p1 vanishes
        mean_exp_sigma = float(np.sum(p1 * exp_sigma))
    return ExactAverages(
        mean_entropy_production=mean_sigma,
        mean_exp_minus_entropy_production=mean_exp_sigma,
        mean_work=float(work.sum()),
        mean_heat=float(heat.sum()),
        mean_exp_minus_work=float(exp_work.sum()) if temperature is not None else None,
        absolute_irreversibility_weight=dead_weight,
    )
