import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aeflow.models import CorrelatedStateParams, bell_states, gibbs_state, qubit_hamiltonian, rho_lambda_theta, two_qubit_system
from aeflow.operators import DimensionError, NotUnitaryError, commutator_norm
from aeflow.optimal import block_dephase, delta_e_for_unitary, optimal_arbitrary_unitary, optimal_energy_preserving
from aeflow.sampling import haar_unitary, local_energy_changes, random_block_unitaries, random_density
from oracles import haar_sampled_minimum, block_grid_oracle, unitary_descent_minimum
from strategies import correlated_params, rng_from, seeds

SYSTEM = two_qubit_system()
BLOCKS = SYSTEM.blocks()


def test_dephase_examples():
    phi, psi = bell_states()
    assert np.allclose(block_dephase(phi, BLOCKS), np.diag([0.5, 0, 0, 0.5]))
    assert np.allclose(block_dephase(psi, BLOCKS), psi)
    d = np.diag([0.1, 0.2, 0.3, 0.4])
    assert np.allclose(block_dephase(d, BLOCKS), d)


@given(seeds)
def test_dephase_idempotent(seed):
    rho = random_density(4, rng_from(seed))
    once = block_dephase(rho, BLOCKS)
    assert np.allclose(block_dephase(once, BLOCKS), once)
    assert np.trace(once).real == pytest.approx(1.0)


def test_theta_zero_gives_no_flow():
    for lam in np.linspace(0, 1, 11):
        res = optimal_energy_preserving(rho_lambda_theta(CorrelatedStateParams(lam, 0.0)), SYSTEM)
        assert abs(res.dE_a) <= 1e-12


def test_thermal_product_gives_no_flow():
    h = qubit_hamiltonian()
    for ba, bb in ((2.0, 0.5), (1.0, 1.0), (5.0, 0.0)):
        rho = np.kron(gibbs_state(ba, h), gibbs_state(bb, h))
        assert abs(optimal_energy_preserving(rho, SYSTEM).dE_a) <= 1e-12
        assert abs(block_grid_oracle(rho)) <= 1e-9


def test_singlet_gives_half():
    res = optimal_energy_preserving(bell_states()[1], SYSTEM)
    assert res.dE_a == pytest.approx(-0.5, abs=1e-12)
    assert np.allclose(res.occupations, [1.0, 0.0])


@given(seeds)
def test_optimal_unitary_is_energy_preserving(seed):
    rho = random_density(4, rng_from(seed))
    res = optimal_energy_preserving(rho, SYSTEM, BLOCKS)
    assert commutator_norm(res.unitary, SYSTEM.h0) < 1e-10
    led = delta_e_for_unitary(rho, res.unitary, SYSTEM)
    assert led.dE_a == pytest.approx(res.dE_a, abs=1e-10)
    assert abs(led.work) < 1e-12
    assert np.allclose(SYSTEM.marginal(res.unitary @ rho @ res.unitary.conj().T, 0), res.sigma_a)


@settings(max_examples=15)
@given(seeds)
def test_optimal_beats_sampled_block_unitaries(seed):
    rng = rng_from(seed)
    rho = random_density(4, rng)
    star = optimal_energy_preserving(rho, SYSTEM, BLOCKS).dE_a
    sampled = local_energy_changes(rho, random_block_unitaries(BLOCKS, 10_000, rng), SYSTEM.local_operator(0))
    assert sampled.min() >= star - 1e-9


@settings(max_examples=15)
@given(seeds)
def test_optimal_matches_parametrized_block_oracle(seed):
    rho = random_density(4, rng_from(seed))
    assert optimal_energy_preserving(rho, SYSTEM).dE_a == pytest.approx(block_grid_oracle(rho), abs=1e-9)


@given(correlated_params())
def test_dephasing_does_not_change_optimum(p):
    rho = rho_lambda_theta(p)
    system = two_qubit_system(p.epsilon)
    a = optimal_energy_preserving(rho, system).dE_a
    b = optimal_energy_preserving(block_dephase(rho, system.blocks()), system).dE_a
    assert a == pytest.approx(b, abs=1e-12)


def test_optimal_scales_with_gap():
    rho_1 = rho_lambda_theta(CorrelatedStateParams(0.2, 0.5, epsilon=1.0))
    rho_3 = rho_lambda_theta(CorrelatedStateParams(0.2, 0.5, beta_a=2 / 3, beta_b=0.5 / 3, epsilon=3.0))
    a = optimal_energy_preserving(rho_1, two_qubit_system(1.0)).dE_a
    b = optimal_energy_preserving(rho_3, two_qubit_system(3.0)).dE_a
    assert b == pytest.approx(3 * a, abs=1e-12)


def test_blocks_must_match_system():
    rho = np.eye(4) / 4
    bad = two_qubit_system().blocks()
    with pytest.raises(DimensionError):
        optimal_energy_preserving(np.eye(8) / 8, SYSTEM, bad)
    with pytest.raises(NotUnitaryError):
        delta_e_for_unitary(rho, 2 * np.eye(4), SYSTEM)


def test_identity_unitary_gives_zero_ledger():
    rho = random_density(4, np.random.Generator(np.random.Philox(3)))
    led = delta_e_for_unitary(rho, np.eye(4), SYSTEM)
    assert all(abs(v) < 1e-12 for v in vars(led).values())


def test_arbitrary_examples():
    phi = bell_states()[0]
    res = optimal_arbitrary_unitary(phi, SYSTEM)
    assert res.dE_a == pytest.approx(-0.5, abs=1e-12)
    assert np.allclose(res.occupations, [1.0, 0.0])
    assert abs(optimal_arbitrary_unitary(np.eye(4) / 4, SYSTEM).dE_a) < 1e-14


@settings(max_examples=10)
@given(seeds)
def test_arbitrary_against_sampling_and_descent(seed):
    rng = rng_from(seed)
    rho = random_density(4, rng)
    h_a = SYSTEM.local_operator(0)
    res = optimal_arbitrary_unitary(rho, SYSTEM)
    # one-sided: the sampled minimum can only lie above the optimum
    assert haar_sampled_minimum(rho, h_a, 100_000, rng) >= res.dE_a - 1e-12
    # two-sided: descent on the unitary orbit reaches it
    assert unitary_descent_minimum(rho, h_a, haar_unitary(4, rng)) == pytest.approx(res.dE_a, abs=1e-6)
    led = delta_e_for_unitary(rho, res.unitary, SYSTEM)
    assert led.dE_a == pytest.approx(res.dE_a, abs=1e-10)


@given(correlated_params())
def test_arbitrary_below_energy_preserving(p):
    rho = rho_lambda_theta(p)
    system = two_qubit_system(p.epsilon)
    assert optimal_arbitrary_unitary(rho, system).dE_a <= optimal_energy_preserving(rho, system).dE_a + 1e-12


def test_non_bipartite_rejected():
    from aeflow.models import tavis_cummings_system

    sys3 = tavis_cummings_system(1.0, 2)
    with pytest.raises(DimensionError):
        optimal_energy_preserving(np.eye(8) / 8, sys3)
