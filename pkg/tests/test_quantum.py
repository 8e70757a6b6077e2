import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qthermo.errors import CapacityError, ConfigurationError, DomainError
from qthermo.quantum import (
    KET0,
    KET1,
    MINUS,
    PLUS,
    X_BASIS,
    Z_BASIS,
    MeasurementBasis,
    born_probabilities,
    commutes_with_hamiltonian,
    entropy_production_protocol,
    enumerate_quantum_branches,
    expected_energy,
    fix_phase,
    mean_quantum_heat,
    projective_measure,
    pure_state,
    rabi_propagator,
    sample_quantum_trajectories,
    sample_quantum_trajectory,
    unitary,
    von_neumann_entropy,
)

seeds = st.integers(0, 2**32 - 1)


def haar(rng):
    z = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def h_nats(p):
    return -sum(x * math.log(x) for x in p if x > 0)


# ---------------------------------------------------------------- states


def test_fix_phase_convention():
    v = fix_phase([0.6j, -0.8j])
    assert v[1].real == pytest.approx(0.8) and v[1].imag == 0.0
    tie = fix_phase(np.array([-1, 1]) / math.sqrt(2))
    assert tie[0] > 0  # first index wins a tie
    assert np.allclose(MINUS, np.array([1, -1]) / math.sqrt(2))


def test_pure_state_validation():
    with pytest.raises(DomainError):
        pure_state([1.0, 1.0])
    assert np.allclose(pure_state([1.0, 1.0], normalize=True), PLUS)
    with pytest.raises(DomainError):
        pure_state([1.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        unitary([[1, 1], [0, 1]])
    with pytest.raises(DomainError):
        MeasurementBasis(np.array([[1, 1], [0, 1]], dtype=complex))


def test_rabi_propagator_pi_pulse_and_half():
    assert np.allclose(fix_phase(rabi_propagator(2.0, math.pi / 2) @ KET0), KET1)
    half = rabi_propagator(1.0, math.pi / 2) @ KET0
    assert expected_energy(half, 3.0) == pytest.approx(1.5)
    with pytest.raises(DomainError):
        rabi_propagator(1.0, -0.1)


@given(st.floats(-10, 10), st.floats(0, 10))
def test_rabi_is_unitary(omega, t):
    u = rabi_propagator(omega, t)
    assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-12)


# ---------------------------------------------------------------- measurement


def test_born_rule_after_third_pi_rotation():
    psi = rabi_propagator(1.0, math.pi / 3) @ KET0
    assert np.allclose(born_probabilities(psi, Z_BASIS), [0.75, 0.25])


def test_quantum_heat_values():
    # Z-measurement of |+> collapses to an eigenstate: heat -w0/2 or +w0/2, zero on average
    assert mean_quantum_heat(PLUS, Z_BASIS, 2.0) == pytest.approx(0.0, abs=1e-15)
    # X-measurement of |0> always lands on <H> = w0/2
    assert mean_quantum_heat(KET0, X_BASIS, 2.0) == pytest.approx(1.0)
    m = projective_measure(KET0, X_BASIS, 2.0, rng=0)
    assert m.quantum_heat == pytest.approx(1.0) and m.probability == pytest.approx(0.5)
    assert commutes_with_hamiltonian(Z_BASIS)
    assert not commutes_with_hamiltonian(X_BASIS)


def test_projective_measure_frequencies():
    rng = np.random.default_rng(0)
    psi = rabi_propagator(1.0, math.pi / 3) @ KET0
    outcomes = [projective_measure(psi, Z_BASIS, 1.0, rng).outcome for _ in range(20000)]
    se = math.sqrt(0.25 * 0.75 / 20000)
    assert abs(np.mean(outcomes) - 0.25) < 5 * se


def test_von_neumann_values():
    assert von_neumann_entropy([(1.0, PLUS)]) == pytest.approx(0.0, abs=1e-12)
    assert von_neumann_entropy([(0.5, KET0), (0.5, KET1)]) == pytest.approx(math.log(2))
    # an equal mixture of |0> and |+> is not maximally mixed
    c2 = math.cos(math.pi / 8) ** 2
    assert von_neumann_entropy([(0.5, KET0), (0.5, PLUS)]) == pytest.approx(h_nats([c2, 1 - c2]))
    with pytest.raises(DomainError):
        von_neumann_entropy([(0.7, KET0), (0.7, KET1)])


# ---------------------------------------------------------------- entropy production


def test_measurement_entropy_hand_value():
    rep = entropy_production_protocol(KET0, rabi_propagator(1.0, math.pi / 3), Z_BASIS)
    assert rep.mean_entropy_production == pytest.approx(h_nats([0.75, 0.25]), abs=1e-12)
    assert rep.mean_entropy_production == pytest.approx(0.5623, abs=1e-4)
    assert rep.von_neumann_change == pytest.approx(rep.mean_entropy_production, abs=1e-12)
    with pytest.raises(ConfigurationError):
        entropy_production_protocol(PLUS, np.eye(2), Z_BASIS)


def test_no_coherence_no_entropy():
    rep = entropy_production_protocol(KET1, np.diag([1, 1j]), Z_BASIS)
    assert rep.mean_entropy_production == 0.0
    swap = entropy_production_protocol(PLUS, np.diag([1, -1]), X_BASIS)
    assert swap.mean_entropy_production == pytest.approx(0.0, abs=1e-12)


@given(seeds)
def test_mean_entropy_equals_von_neumann_change(seed):
    rng = np.random.default_rng(seed)
    basis = MeasurementBasis(haar(rng))
    U = haar(rng)
    rep = entropy_production_protocol(basis.state(int(rng.integers(2))), U, basis)
    assert rep.mean_entropy_production == pytest.approx(rep.von_neumann_change, abs=1e-10)
    assert rep.mean_entropy_production >= -1e-12
    w = rng.dirichlet([1, 1])
    mixed = entropy_production_protocol(None, U, basis, weights=w)
    assert mixed.mean_entropy_production == pytest.approx(mixed.von_neumann_change, abs=1e-10)


# ---------------------------------------------------------------- trajectories


def three_rounds():
    return [(rabi_propagator(1.0, math.pi / 2), Z_BASIS)] * 3


def test_three_round_branches():
    branches = enumerate_quantum_branches(KET0, three_rounds(), 1.0)
    assert len(branches) == 8
    assert sum(b.probability for b in branches) == pytest.approx(1.0)
    for b in branches:
        assert b.probability == pytest.approx(1 / 8)
        assert b.work + b.quantum_heat == pytest.approx(b.delta_energy, abs=1e-12)
    assert sum(b.probability * b.entropy_production for b in branches) == pytest.approx(3 * math.log(2))


def test_branch_cap():
    with pytest.raises(CapacityError):
        enumerate_quantum_branches(KET0, [(np.eye(2), Z_BASIS)] * 17, 1.0)


@given(seeds)
def test_segment_energy_balance(seed):
    rng = np.random.default_rng(seed)
    segs = [(haar(rng), MeasurementBasis(haar(rng)) if rng.random() < 0.7 else None) for _ in range(3)]
    leds = sample_quantum_trajectory(KET0, segs, 1.7, seed)
    for led in leds:
        assert led.work + led.quantum_heat == pytest.approx(led.energy_after - led.energy_before, abs=1e-12)
        if led.outcome is None:
            assert led.entropy_production == 0.0


def test_sampled_branch_frequencies_and_workers():
    segs = [(rabi_propagator(1.0, math.pi / 3), Z_BASIS), (rabi_propagator(1.0, 1.0), X_BASIS)]
    exact = {b.outcomes: b.probability for b in enumerate_quantum_branches(KET0, segs, 1.0)}
    s1 = sample_quantum_trajectories(KET0, segs, 1.0, 20000, seed=2, workers=1)
    s3 = sample_quantum_trajectories(KET0, segs, 1.0, 20000, seed=2, workers=3)
    assert s1.outcomes == s3.outcomes and np.array_equal(s1.work, s3.work)
    for outcomes, p in exact.items():
        freq = sum(o == outcomes for o in s1.outcomes) / 20000
        assert abs(freq - p) < 5 * math.sqrt(p * (1 - p) / 20000) + 1e-12
