"""Information thermodynamics of a classical Maxwell demon.

A demon reads a system bit into a memory through a noisy channel, then acts
on the system with a feedback that depends on the memory only. Entropy
bookkeeping is in bits for information quantities and nats for entropy
production; the conversion factor is ``ln 2``.

Sign conventions
----------------
``work`` passed to :func:`demon_efficiency` is work done *on* the system, so
extraction is negative. ``DemonLedger.work_extracted`` is the opposite sign.
Mutual-information *changes* in ledgers and reports use the standard sign
(``log p(x,m) - log p(x)p(m)``, non-negative on average); the per-outcome
helper :func:`stochastic_mutual_info` keeps the opposite orientation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, DegenerateInputError, DomainError
from .units import KB, LN2

SATURATION_TOL = 1e-9


def _check_probability(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability must lie in [0, 1], got {p}")


def _check_temperature(T: float) -> None:
    if not T > 0:
        raise DomainError(f"temperature must be positive, got {T}")


def _xlog2x(p: float) -> float:
    return p * math.log2(p) if p > 0 else 0.0


def shannon_entropy_bits(p: float) -> float:
    """Binary Shannon entropy ``H[p]`` in bits."""
    _check_probability(p)
    return -_xlog2x(p) - _xlog2x(1.0 - p)


def entropy_bits(probs: Sequence[float]) -> float:
    return -sum(_xlog2x(float(q)) for q in np.ravel(probs))


def szilard_work_bound(T: float, si: bool = False) -> float:
    """Maximal work from one bit, ``T ln 2`` (``k_B T ln 2`` joules with ``si``)."""
    _check_temperature(T)
    return (KB if si else 1.0) * T * LN2


def landauer_cost(p: float, T: float, si: bool = False) -> float:
    """Minimal erasure work of a memory whose outcome has probability ``p``.

    ``T ln 2 H[p]``: a fair bit costs exactly the Szilard bound and a certain
    outcome costs nothing.
    """
    _check_temperature(T)
    return (KB if si else 1.0) * T * LN2 * shannon_entropy_bits(p)


@dataclass(frozen=True)
class JointDistribution:
    """``matrix[x, m]``: system state ``x``, memory state ``m``."""

    matrix: np.ndarray

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float)
        if a.ndim != 2:
            raise DomainError("joint distribution must be a matrix")
        if np.any(a < 0) or np.any(a > 1):
            raise DomainError("joint probabilities must lie in [0, 1]")
        if abs(a.sum() - 1.0) > 1e-12:
            raise DomainError(f"joint probabilities sum to {a.sum()!r}")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def system(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    @property
    def memory(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    def mutual_information_bits(self) -> float:
        """``H_S + H_M - H_SM`` (standard sign, >= 0)."""
        return entropy_bits(self.system) + entropy_bits(self.memory) - entropy_bits(self.matrix)


def stochastic_mutual_info(joint: JointDistribution, x: int, m: int) -> float:
    """Per-outcome ``log2(p(x) p(m)) - log2 p(x, m)`` in bits.

    Its average is minus the usual mutual information; use
    :meth:`JointDistribution.mutual_information_bits` for the standard sign.
    """
    pxm = joint.matrix[x, m]
    if pxm <= 0:
        raise DomainError(f"p(x={x}, m={m}) = 0; stochastic mutual information undefined")
    return math.log2(joint.system[x] * joint.memory[m]) - math.log2(pxm)


def measure_bit(system: Sequence[float], error_rate: float) -> JointDistribution:
    """Binary symmetric readout: the memory copies the bit, flipped with ``error_rate``."""
    if not 0.0 <= error_rate <= 0.5:
        raise DomainError(f"error rate must lie in [0, 0.5], got {error_rate}")
    p = np.asarray(system, dtype=float)
    if p.shape != (2,):
        raise DomainError("measure_bit needs a distribution over {0, 1}")
    channel = np.array([[1 - error_rate, error_rate], [error_rate, 1 - error_rate]])
    return JointDistribution(p[:, None] * channel)


@dataclass(frozen=True)
class FeedbackRule:
    """One column-stochastic kernel ``K_m[y, x]`` per memory state ``m``."""

    kernels: Tuple[np.ndarray, ...]

    def __post_init__(self):
        ks = tuple(np.array(k, dtype=float) for k in self.kernels)
        for m, k in enumerate(ks):
            if k.ndim != 2 or k.shape[0] != k.shape[1]:
                raise ConfigurationError(f"feedback kernel {m} is not square")
            if np.any(k < 0) or np.any(np.abs(k.sum(axis=0) - 1.0) > 1e-12):
                raise ConfigurationError(f"feedback kernel {m} is not column-stochastic")
            k.setflags(write=False)
        object.__setattr__(self, "kernels", ks)

    @property
    def ideal(self) -> bool:
        """Every kernel is a symmetric permutation, so ``P[y|x,m] = P[x|y,m]``."""
        for k in self.kernels:
            is_perm = np.all((k == 0) | (k == 1)) and np.all(k.sum(axis=1) == 1)
            if not (is_perm and np.array_equal(k, k.T)):
                return False
        return True

    @classmethod
    def reset(cls) -> "FeedbackRule":
        """Flip the bit when the memory reads 1, leave it when it reads 0."""
        return cls((np.eye(2), np.array([[0.0, 1.0], [1.0, 0.0]])))

    @classmethod
    def identity(cls, n_memory: int = 2) -> "FeedbackRule":
        return cls(tuple(np.eye(2) for _ in range(n_memory)))


@dataclass(frozen=True)
class DemonLedger:
    delta_S_bits: float
    delta_I_bits: float
    entropy_production_nats: float
    work_extracted: float
    landauer_cost: float


@dataclass(frozen=True)
class GiftReport:
    """Enumeration of every (x, m, y) path of a measurement-plus-feedback step.

    Columns are parallel arrays. ``entropy_production`` is ``ln(P_F / P_B)``
    computed from path probabilities; ``entropy_production_gift`` is the
    information form ``ln 2 (dS - dI)``. They coincide for ideal feedback.
    """

    paths: np.ndarray  # (rows, 3): x, m, y
    probabilities: np.ndarray
    delta_S_bits: np.ndarray
    delta_I_bits: np.ndarray
    entropy_production: np.ndarray
    entropy_production_gift: np.ndarray
    backward_probability_zero: np.ndarray
    ideal: bool
    final_joint: JointDistribution

    @property
    def advisory(self) -> bool:
        """True when the information form of the theorem is not guaranteed."""
        return not self.ideal

    def _avg(self, values):
        live = self.probabilities > 0
        return float(np.sum(self.probabilities[live] * values[live]))

    @property
    def mean_delta_S_bits(self) -> float:
        return self._avg(self.delta_S_bits)

    @property
    def mean_delta_I_bits(self) -> float:
        return self._avg(self.delta_I_bits)

    @property
    def mean_entropy_production(self) -> float:
        return self._avg(self.entropy_production)

    @property
    def mean_exp_minus_entropy_production(self) -> float:
        return self._avg(np.exp(-self.entropy_production))


def _log2(x):
    with np.errstate(divide="ignore"):
        return np.log2(x)


def gift_enumerate(joint: JointDistribution, feedback: FeedbackRule) -> GiftReport:
    """Exact table of the generalised fluctuation theorem for one feedback step.

    The memory is left untouched by the feedback, so ``p1(m) = p0(m)``.
    """
    p0 = joint.matrix
    nx, nm = p0.shape
    if len(feedback.kernels) != nm:
        raise ConfigurationError(f"feedback has {len(feedback.kernels)} kernels for {nm} memory states")
    if any(k.shape[0] != nx for k in feedback.kernels):
        raise ConfigurationError("feedback kernel size does not match system size")
    p1 = np.zeros_like(p0)
    for m, k in enumerate(feedback.kernels):
        p1[:, m] = k @ p0[:, m]
    final = JointDistribution(p1 / p1.sum())
    p0x, p0m = p0.sum(axis=1), p0.sum(axis=0)
    p1y, p1m = p1.sum(axis=1), p1.sum(axis=0)

    rows = [(x, m, y) for x in range(nx) for m in range(nm) for y in range(nx)]
    paths = np.array(rows, dtype=np.int64)
    x, m, y = paths[:, 0], paths[:, 1], paths[:, 2]
    kern = np.stack(feedback.kernels)  # kern[m, y, x]
    fwd_k = kern[m, y, x]
    bwd_k = kern[m, x, y]
    pf = p0[x, m] * fwd_k
    pb = p1[y, m] * bwd_k
    zero = pb == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = np.where(zero, np.inf, np.log(pf) - np.log(np.where(zero, 1.0, pb)))
        dS = _log2(p0x[x]) - _log2(p1y[y])
        # standard-sign stochastic mutual information, log p(x,m) - log p(x)p(m)
        i0 = _log2(p0[x, m]) - _log2(p0x[x] * p0m[m])
        i1 = _log2(p1[y, m]) - _log2(p1y[y] * p1m[m])
        dI = i1 - i0
        gift = np.where(zero, np.inf, LN2 * (dS - dI))
    return GiftReport(
        paths=paths,
        probabilities=pf,
        delta_S_bits=dS,
        delta_I_bits=dI,
        entropy_production=sigma,
        entropy_production_gift=gift,
        backward_probability_zero=zero,
        ideal=feedback.ideal,
        final_joint=final,
    )


@dataclass(frozen=True)
class DemonEfficiency:
    eta: float
    saturated: bool


def demon_efficiency(work: float, delta_F: float, delta_I_bits: float, T: float) -> DemonEfficiency:
    """``W / (dF + T ln 2 dI)`` with ``W`` the work done on the system."""
    _check_temperature(T)
    bound = delta_F + T * LN2 * delta_I_bits
    if bound == 0:
        raise DegenerateInputError("work bound dF + T ln2 dI is zero; efficiency undefined")
    eta = work / bound + 0.0  # no negative zero
    return DemonEfficiency(eta, abs(eta - 1.0) <= SATURATION_TOL)


@dataclass(frozen=True)
class DemonResult:
    ledger: DemonLedger
    report: GiftReport
    ift_mean: float
    eta: Optional[float]


FEEDBACKS = {"reset": FeedbackRule.reset, "identity": FeedbackRule.identity}


def run_demon(
    error_rate: float,
    input_bias: float,
    feedback: str = "reset",
    temperature: float = 1.0,
    si: bool = False,
) -> DemonResult:
    """Measure a bit with ``P(x=0) = input_bias``, apply feedback, erase the memory.

    The system bit has degenerate levels, so a permutation feedback costs no
    work and ``dF = 0``. The erasure charge is the Landauer cost of the
    memory's marginal. ``eta`` is ``None`` when the information change
    vanishes and the efficiency is undefined.
    """
    _check_probability(input_bias)
    if feedback not in FEEDBACKS:
        raise ConfigurationError(f"unknown feedback {feedback!r}; choose from {sorted(FEEDBACKS)}")
    joint = measure_bit([input_bias, 1.0 - input_bias], error_rate)
    report = gift_enumerate(joint, FEEDBACKS[feedback]())
    dI = report.mean_delta_I_bits
    erase = landauer_cost(float(joint.memory[0]), temperature, si=si)
    ledger = DemonLedger(
        delta_S_bits=report.mean_delta_S_bits,
        delta_I_bits=dI,
        entropy_production_nats=report.mean_entropy_production,
        work_extracted=0.0,
        landauer_cost=erase,
    )
    try:
        eta = demon_efficiency(0.0, 0.0, dI, temperature).eta
    except DegenerateInputError:
        eta = None
    return DemonResult(ledger, report, report.mean_exp_minus_entropy_production, eta)
