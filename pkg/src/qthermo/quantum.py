"""Pure-state trajectories of a driven, projectively measured qubit.

The bare Hamiltonian is ``H = omega0 |1><1|`` (hbar = 1). Unitaries act in the
rotating frame of a resonant drive; energies are always evaluated against the
bare ``H``. Work is the change of ``<H>`` across a unitary segment, quantum
heat the change caused by a measurement collapse.

States are complex arrays of shape ``(2,)``. Their global phase is fixed so
that the largest-magnitude amplitude (first one on ties) is real and
non-negative, which makes equality tests between states meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import CapacityError, ConfigurationError, DomainError

NORM_TOL = 1e-12
BRANCH_CAP = 2**16

RngLike = Union[int, np.random.Generator, None]


def fix_phase(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    k = int(np.argmax(np.round(np.abs(v), 14)))
    a = v[k]
    if abs(a) == 0:
        return v.copy()
    return v * (abs(a) / a)


def pure_state(amplitudes: Sequence[complex], normalize: bool = False) -> np.ndarray:
    """Validated, phase-fixed qubit state."""
    v = np.asarray(amplitudes, dtype=complex).reshape(-1)
    if v.shape != (2,):
        raise DomainError(f"a qubit state has 2 amplitudes, got {v.size}")
    norm = float(np.vdot(v, v).real)
    if normalize:
        if norm == 0:
            raise DomainError("cannot normalise the zero vector")
        v = v / math.sqrt(norm)
    elif abs(norm - 1.0) > NORM_TOL:
        raise DomainError(f"state norm^2 is {norm!r}, not 1")
    return fix_phase(v)


_S = 1.0 / math.sqrt(2.0)
KET0 = pure_state([1.0, 0.0])
KET1 = pure_state([0.0, 1.0])
PLUS = pure_state([_S, _S])
MINUS = pure_state([-_S, _S])  # (-|0> + |1>)/sqrt2, stored with the fixed phase


def unitary(matrix) -> np.ndarray:
    u = np.asarray(matrix, dtype=complex)
    if u.shape != (2, 2):
        raise DomainError(f"expected a 2x2 matrix, got shape {u.shape}")
    if np.max(np.abs(u.conj().T @ u - np.eye(2))) > NORM_TOL:
        raise DomainError("matrix is not unitary")
    return u


IDENTITY = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class MeasurementBasis:
    """Two orthonormal states, stored as the columns of ``vectors``."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        if v.shape != (2, 2):
            raise DomainError("a qubit measurement basis is a 2x2 matrix of column vectors")
        if np.max(np.abs(v.conj().T @ v - np.eye(2))) > NORM_TOL:
            raise DomainError("basis vectors are not orthonormal")
        v = np.column_stack([fix_phase(v[:, 0]), fix_phase(v[:, 1])])
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @classmethod
    def from_states(cls, first, second) -> "MeasurementBasis":
        return cls(np.column_stack([np.asarray(first, complex), np.asarray(second, complex)]))

    def state(self, k: int) -> np.ndarray:
        return self.vectors[:, k].copy()

    def __iter__(self):
        return iter((self.state(0), self.state(1)))


Z_BASIS = MeasurementBasis.from_states(KET0, KET1)
X_BASIS = MeasurementBasis.from_states(PLUS, MINUS)


def rabi_propagator(omega_rabi: float, t: float) -> np.ndarray:
    """Resonant Rabi rotation by ``omega_rabi * t`` on the Bloch sphere.

    ``|0> -> cos(theta/2)|0> + sin(theta/2)|1>``; the matrix is real.
    """
    if t < 0:
        raise DomainError(f"duration must be non-negative, got {t}")
    half = 0.5 * omega_rabi * t
    c, s = math.cos(half), math.sin(half)
    return np.array([[c, -s], [s, c]], dtype=complex)


def expected_energy(state: np.ndarray, omega0: float) -> float:
    return float(omega0 * abs(state[1]) ** 2)


def born_probabilities(state: np.ndarray, basis: MeasurementBasis) -> np.ndarray:
    amps = basis.vectors.conj().T @ state
    p = np.abs(amps) ** 2
    return p / p.sum()


class Measurement(NamedTuple):
    outcome: int
    post_state: np.ndarray
    quantum_heat: float
    probability: float


def projective_measure(
    state: np.ndarray, basis: MeasurementBasis, omega0: float, rng: RngLike = None
) -> Measurement:
    """Born-rule collapse onto one basis state, with the energy it injects."""
    rng = np.random.default_rng(rng)
    p = born_probabilities(state, basis)
    k = 0 if rng.random() < p[0] else 1
    post = basis.state(k)
    q = expected_energy(post, omega0) - expected_energy(state, omega0)
    return Measurement(k, post, q, float(p[k]))


def mean_quantum_heat(state: np.ndarray, basis: MeasurementBasis, omega0: float) -> float:
    """Exact outcome average ``sum_k p_k <H>(m_k) - <H>(psi)``."""
    p = born_probabilities(state, basis)
    post = sum(p[k] * expected_energy(basis.state(k), omega0) for k in range(2))
    return float(post - expected_energy(state, omega0))


def commutes_with_hamiltonian(basis: MeasurementBasis, tol: float = 1e-12) -> bool:
    """True when the measured observable shares eigenvectors with ``H``."""
    return bool(np.all(np.minimum(np.abs(basis.vectors[0]), np.abs(basis.vectors[1])) <= tol))


def _entropy_nats(p: Iterable[float]) -> float:
    return float(-sum(x * math.log(x) for x in p if x > 0))


def density_matrix(mixture: Sequence[Tuple[float, np.ndarray]]) -> np.ndarray:
    rho = np.zeros((2, 2), dtype=complex)
    for w, psi in mixture:
        psi = np.asarray(psi, dtype=complex)
        rho += w * np.outer(psi, psi.conj())
    return rho


def von_neumann_entropy(mixture: Sequence[Tuple[float, np.ndarray]]) -> float:
    """``-Tr rho ln rho`` in nats for a weighted list of pure states."""
    weights = np.array([w for w, _ in mixture], dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > NORM_TOL:
        raise DomainError("mixture weights must be a probability distribution")
    rho = density_matrix(mixture)
    evals = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    return _entropy_nats(np.clip(evals, 0.0, 1.0))


@dataclass(frozen=True)
class MeasurementEntropyReport:
    """Exact two-point statistics of (prepare eigenstate, evolve, measure).

    ``entropy_production[j, k]`` belongs to the path starting in eigenstate
    ``j`` and ending in outcome ``k``; ``path_probabilities`` has the same shape.
    """

    initial_weights: np.ndarray
    outcome_probabilities: np.ndarray
    path_probabilities: np.ndarray
    entropy_production: np.ndarray
    mean_entropy_production: float
    von_neumann_change: float


def entropy_production_protocol(
    initial: Optional[np.ndarray],
    U: np.ndarray,
    basis: MeasurementBasis,
    weights: Optional[Sequence[float]] = None,
) -> MeasurementEntropyReport:
    """Entropy production of a measurement after a unitary, enumerated exactly.

    Start either in an eigenstate ``initial`` of the measured observable or,
    via ``weights``, in a diagonal mixture of its eigenstates. Each path
    ``(j, k)`` produces ``ln(q_j / p_k)`` (``-ln p_k`` for a pure start); the
    average is compared with the von Neumann entropy change computed from
    density-matrix eigenvalues.
    """
    U = unitary(U)
    if weights is None:
        if initial is None:
            raise ConfigurationError("give an initial eigenstate or eigenstate weights")
        overlap = born_probabilities(np.asarray(initial, complex), basis)
        j = int(np.argmax(overlap))
        if abs(overlap[j] - 1.0) > 1e-10:
            raise ConfigurationError(
                "initial state is not an eigenstate of the measured observable; pass weights"
            )
        q = np.zeros(2)
        q[j] = 1.0
    else:
        q = np.asarray(weights, dtype=float)
        if q.shape != (2,) or np.any(q < 0) or abs(q.sum() - 1.0) > NORM_TOL:
            raise DomainError("weights must be a distribution over the two eigenstates")
    # cond[j, k] = |<m_k| U |m_j>|^2
    cond = np.abs(basis.vectors.conj().T @ U @ basis.vectors).T ** 2
    cond = cond / cond.sum(axis=1, keepdims=True)
    paths = q[:, None] * cond
    p = paths.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = np.log(q)[:, None] - np.log(p)[None, :]
    live = paths > 0
    mean = float(np.sum(paths[live] * sigma[live]))
    before = von_neumann_entropy([(q[k], basis.state(k)) for k in range(2)])
    after = von_neumann_entropy([(p[k], basis.state(k)) for k in range(2)])
    return MeasurementEntropyReport(q, p, paths, sigma, mean, after - before)


@dataclass(frozen=True)
class QuantumLedger:
    """Bookkeeping for one (unitary, optional measurement) segment."""

    work: float
    quantum_heat: float
    outcome: Optional[int]
    probability: float
    entropy_production: float
    energy_before: float
    energy_after: float


Segment = Tuple[np.ndarray, Optional[MeasurementBasis]]


def _run_segment(state, U, basis, omega0, outcome_draw):
    e0 = expected_energy(state, omega0)
    psi = fix_phase(U @ state)
    e1 = expected_energy(psi, omega0)
    if basis is None:
        return psi, QuantumLedger(e1 - e0, 0.0, None, 1.0, 0.0, e0, e1)
    p = born_probabilities(psi, basis)
    k = outcome_draw(p)
    post = basis.state(k)
    e2 = expected_energy(post, omega0)
    return post, QuantumLedger(e1 - e0, e2 - e1, k, float(p[k]), -math.log(p[k]), e0, e2)


def sample_quantum_trajectory(
    initial: np.ndarray, segments: Sequence[Segment], omega0: float, seed: RngLike
) -> List[QuantumLedger]:
    """One sampled trajectory, one ledger per segment.

    Entropy production accumulates as the sum of ``-ln p_k`` over the
    measurements, with ``p_k`` the Born probability of the observed outcome.
    """
    rng = np.random.default_rng(seed)
    state = pure_state(initial)

    def draw(p):
        return 0 if rng.random() < p[0] else 1

    out = []
    for U, basis in segments:
        state, led = _run_segment(state, unitary(U), basis, omega0, draw)
        out.append(led)
    return out


@dataclass(frozen=True)
class Branch:
    outcomes: Tuple[Optional[int], ...]
    probability: float
    work: float
    quantum_heat: float
    entropy_production: float
    delta_energy: float


def enumerate_quantum_branches(
    initial: np.ndarray, segments: Sequence[Segment], omega0: float
) -> List[Branch]:
    """Every outcome sequence with its exact probability and totals."""
    n_meas = sum(b is not None for _, b in segments)
    if 2**n_meas > BRANCH_CAP:
        raise CapacityError(f"{2 ** n_meas} branches exceed the cap of {BRANCH_CAP}")
    state0 = pure_state(initial)
    e_init = expected_energy(state0, omega0)
    branches: List[Branch] = []

    def walk(state, idx, outcomes, prob, w, q, s):
        if idx == len(segments):
            branches.append(
                Branch(tuple(outcomes), prob, w, q, s, expected_energy(state, omega0) - e_init)
            )
            return
        U, basis = segments[idx]
        U = unitary(U)
        if basis is None:
            nxt, led = _run_segment(state, U, None, omega0, None)
            walk(nxt, idx + 1, outcomes + [None], prob, w + led.work, q, s)
            return
        for k in (0, 1):
            nxt, led = _run_segment(state, U, basis, omega0, lambda p, k=k: k)
            if led.probability == 0:
                continue
            walk(
                nxt,
                idx + 1,
                outcomes + [k],
                prob * led.probability,
                w + led.work,
                q + led.quantum_heat,
                s + led.entropy_production,
            )

    walk(state0, 0, [], 1.0, 0.0, 0.0, 0.0)
    return branches


@dataclass(frozen=True)
class TrajectorySample:
    """Sampled outcome sequences with per-trajectory totals, in sample order."""

    outcomes: List[Tuple[Optional[int], ...]]
    work: np.ndarray
    quantum_heat: np.ndarray
    entropy_production: np.ndarray


def sample_quantum_trajectories(
    initial: np.ndarray,
    segments: Sequence[Segment],
    omega0: float,
    n: int,
    seed: int,
    workers: Optional[int] = None,
) -> TrajectorySample:
    """``n`` independent trajectories drawn chunk by chunk.

    Chunk ``c`` uses its own stream ``default_rng([seed, c])``, so results do
    not depend on the worker count.
    """
    from ._parallel import chunk_rng, map_chunks

    if n < 1:
        raise ConfigurationError(f"need at least one trajectory, got {n}")
    segments = [(unitary(U), b) for U, b in segments]

    def work(chunk, start, stop):
        rng = chunk_rng(seed, chunk)
        rows = []
        for _ in range(stop - start):
            leds = sample_quantum_trajectory(initial, segments, omega0, rng)
            rows.append(
                (
                    tuple(l.outcome for l in leds),
                    sum(l.work for l in leds),
                    sum(l.quantum_heat for l in leds),
                    sum(l.entropy_production for l in leds),
                )
            )
        return rows

    rows = [r for part in map_chunks(work, n, workers) for r in part]
    return TrajectorySample(
        outcomes=[r[0] for r in rows],
        work=np.array([r[1] for r in rows]),
        quantum_heat=np.array([r[2] for r in rows]),
        entropy_production=np.array([r[3] for r in rows]),
    )
