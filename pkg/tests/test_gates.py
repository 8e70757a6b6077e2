import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qthermo.errors import CapacityError, DomainError
from qthermo.gates import (
    default_truncation,
    coherent_state,
    gate_energy_cost,
    gate_fidelity,
    infidelity_slope,
    jc_evolve,
    landauer_ratio,
    mean_photon_number,
    min_photons_for_fidelity,
    photon_grid,
    poisson_leakage,
    product_state,
    reduced_qubit,
)

HBAR = 1.054571817e-34


def poisson_tail(n_bar, n_max):
    # 1 - sum_{k <= n_max} e^-n n^k / k!, summed in log space
    head = sum(math.exp(k * math.log(n_bar) - n_bar - math.lgamma(k + 1)) for k in range(n_max + 1))
    return 1.0 - head


def test_leakage_matches_direct_sum():
    for n_bar, n_max in [(1.0, 5), (4.0, 10), (30.0, 45)]:
        assert poisson_leakage(n_bar, n_max) == pytest.approx(poisson_tail(n_bar, n_max), abs=1e-13)
    assert poisson_leakage(0.0, 3) == 0.0


def test_default_truncation_rule():
    for n_bar in (1.0, 4.0, 100.0, 1600.0):
        n = default_truncation(n_bar)
        assert n >= math.ceil(n_bar + 8 * math.sqrt(n_bar))
        assert poisson_leakage(n_bar, n) < 1e-10
        if n > math.ceil(n_bar + 8 * math.sqrt(n_bar)):
            assert poisson_leakage(n_bar, n - 1) >= 1e-10
    assert default_truncation(1600.0) == 1920  # about 1900 for the largest benchmark field


def test_coherent_state_mean_and_phase():
    field = coherent_state(4.0)
    assert np.linalg.norm(field) == pytest.approx(1.0, abs=1e-14)
    assert mean_photon_number(field) == pytest.approx(4.0, abs=1e-8)
    rotated = coherent_state(4.0, phase=math.pi / 2)
    # <n=1|alpha> / <n=0|alpha> = alpha = 2i
    assert rotated[1] / rotated[0] == pytest.approx(2j)
    assert np.allclose(coherent_state(0.0)[:1], [1.0])


def test_coherent_state_capacity_errors():
    with pytest.raises(CapacityError):
        coherent_state(100.0, n_max=120)
    with pytest.raises(DomainError):
        coherent_state(-1.0)


def test_vacuum_rabi_swap():
    psi = np.zeros((2, 3), dtype=complex)
    psi[1, 0] = 1.0  # excited qubit, empty cavity
    out = jc_evolve(psi, g=1.0, t=math.pi)
    # full swap into one photon, with the -i of the exchange Hamiltonian
    assert out[0, 1] == pytest.approx(-1j)
    assert abs(out[1, 0]) < 1e-15
    ground = np.zeros((2, 3), dtype=complex)
    ground[0, 0] = 1.0
    assert np.array_equal(jc_evolve(ground, 1.0, 2.3), ground)


@given(st.integers(0, 2**32 - 1), st.floats(0, 5), st.floats(0, 5))
def test_jc_preserves_norm(seed, g, t):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=(2, 6)) + 1j * rng.normal(size=(2, 6))
    psi /= np.linalg.norm(psi)
    out = jc_evolve(psi, g, t)
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-12)
    rho = reduced_qubit(out)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)


def test_energy_cost_anchor():
    e = gate_energy_cost(1000.0, 6e9)
    assert e == pytest.approx(1000 * HBAR * 2 * math.pi * 6e9, rel=1e-15)
    assert e == pytest.approx(3.97e-21, rel=5e-3)
    assert math.floor(math.log10(e)) == -21
    assert landauer_ratio(e) == pytest.approx(e / (1.380649e-23 * 300 * math.log(2)))
    with pytest.raises(DomainError):
        gate_energy_cost(1.0, 0.0)


def test_fidelity_limits():
    assert gate_fidelity(0.0, 10.0).fidelity == 1.0
    big = gate_fidelity(math.pi / 2, 1e4)
    assert big.fidelity > 0.9999
    small = gate_fidelity(math.pi / 2, 4.0)
    assert small.fidelity < big.fidelity
    assert small.energy_joules == pytest.approx(gate_energy_cost(4.0, 6e9))


def test_infidelity_scales_inversely_with_photons():
    assert infidelity_slope((25, 100, 400, 1600)) == pytest.approx(-1.0, abs=0.2)


def test_photon_threshold():
    assert 300 <= min_photons_for_fidelity(0.9998) <= 3000
    assert min_photons_for_fidelity(0.9) <= min_photons_for_fidelity(0.99) <= min_photons_for_fidelity(0.999)
    n = min_photons_for_fidelity(0.999)
    assert gate_fidelity(math.pi / 2, n).fidelity >= 0.999
    with pytest.raises(DomainError):
        min_photons_for_fidelity(1.0)
    with pytest.raises(CapacityError):
        min_photons_for_fidelity(0.99, grid=[1, 2, 3])


def test_photon_grid_is_sorted_and_spans():
    g = photon_grid()
    assert g[0] == 1 and g[-1] == 1e5
    assert np.all(np.diff(g) > 0)
