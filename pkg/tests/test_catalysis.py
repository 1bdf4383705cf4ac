from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import null_space

from aeflow.catalysis import (
    SWEEP_COLUMNS,
    FixedPointError,
    SweepConfig,
    apply_reduced_channel,
    catalytic_protocol,
    fixed_point_catalyst,
    optimize_tau,
    power_iteration_fixed_point,
    reduced_channel_matrix,
    sweep_lambda_theta,
    tavis_cummings_setup,
    toy_permutation,
    toy_setup,
    toy_state,
)
from aeflow.models import CorrelatedStateParams, rho_lambda_theta
from aeflow.operators import commutator_norm, is_density, trace_distance
from aeflow.sampling import haar_unitary, random_density
from strategies import lambda_theta, rng_from, seeds

TC_G = 0.1
TC = tavis_cummings_setup(1.0, TC_G, 3)
FAST = SweepConfig(tau_points=60, refine_iters=30)


def rho_at(lam, theta):
    return rho_lambda_theta(CorrelatedStateParams(lam, theta))


def test_channel_matrix_identity_unitary():
    m = reduced_channel_matrix(np.eye(4) / 4, np.eye(12), 3)
    assert np.allclose(m, np.eye(9))


@given(seeds)
def test_channel_matrix_trace_preserving(seed):
    rng = rng_from(seed)
    m = reduced_channel_matrix(random_density(4, rng), haar_unitary(12, rng), 3)
    vec_id = np.eye(3).ravel()
    assert np.allclose(vec_id @ m, vec_id, atol=1e-12)


@given(seeds)
def test_channel_matrix_matches_direct_evaluation(seed):
    rng = rng_from(seed)
    rho, u, omega = random_density(4, rng), haar_unitary(12, rng), random_density(3, rng)
    m = reduced_channel_matrix(rho, u, 3)
    direct = apply_reduced_channel(rho, u, omega)
    assert np.max(np.abs((m @ omega.ravel()).reshape(3, 3) - direct)) <= 1e-11


def test_identity_unitary_fixes_everything():
    sol = fixed_point_catalyst(np.eye(4) / 4, np.eye(12), 3)
    assert sol.fixed_space_dim == 9
    assert not sol.unique
    assert np.allclose(sol.omega, np.eye(3) / 3, atol=1e-9)


def test_toy_catalyst_is_maximally_mixed():
    sol = fixed_point_catalyst(toy_state(), toy_permutation(), 2)
    assert sol.residual <= 1e-12
    assert trace_distance(sol.omega, np.eye(2) / 2) <= 1e-12


@settings(max_examples=20)
@given(lambda_theta(), st.floats(1.0, 200.0))
def test_tavis_cummings_fixed_point(lt, tau):
    rho = rho_at(*lt)
    u = TC.unitary(tau)
    sol = fixed_point_catalyst(rho, u, TC.d_c, tau=tau)
    assert is_density(sol.omega, tol=1e-10)
    assert sol.residual <= 1e-9
    restored = apply_reduced_channel(rho, u, sol.omega)
    assert trace_distance(restored, sol.omega) <= 1e-9
    if sol.unique:
        # independent oracle: kernel of (M - 1) via SVD
        m = reduced_channel_matrix(rho, u, TC.d_c)
        ker = null_space(m - np.eye(TC.d_c**2), rcond=1e-9)
        assert ker.shape[1] == 1
        ref = ker[:, 0].reshape(TC.d_c, TC.d_c)
        ref = ref / np.trace(ref)
        assert trace_distance(ref, sol.omega) <= 1e-8


def test_power_iteration_agrees_on_toy():
    m = reduced_channel_matrix(toy_state(), toy_permutation(), 2)
    cross = power_iteration_fixed_point(m, np.diag([1.0, 0.0]), iters=2000)
    assert trace_distance(cross, np.eye(2) / 2) < 1e-3


def test_non_cptp_map_raises():
    with pytest.raises(FixedPointError):
        fixed_point_catalyst(np.eye(4) / 4, 2 * np.eye(8), 2)


def test_tavis_cummings_unitary_conserves_energy():
    for tau in (0.3, 5.0, 77.0):
        u = TC.unitary(tau)
        assert commutator_norm(u, TC.h_free) < 1e-10
        assert np.allclose(u @ u.conj().T, np.eye(12), atol=1e-12)


@pytest.mark.parametrize("eps", [1.0, 2.0])
def test_toy_protocol(eps):
    res = catalytic_protocol(toy_state(), 0.0, toy_setup(eps))
    assert res.dE_a == pytest.approx(-eps / 4, abs=1e-12)
    assert res.catalyst_residual <= 1e-12
    assert res.energy_residual <= 1e-12


@given(lambda_theta())
def test_zero_time_limit(lt):
    rho = rho_at(*lt)
    res = catalytic_protocol(rho, 1e-10, TC)
    assert res.dE_a == pytest.approx(res.dE_star, abs=1e-8)


@settings(max_examples=15)
@given(lambda_theta(), st.floats(0.5, 200.0))
def test_protocol_contracts(lt, tau):
    res = catalytic_protocol(rho_at(*lt), tau, TC)
    assert res.catalyst_residual <= 1e-9
    assert res.energy_residual <= 1e-9
    assert is_density(res.sigma_ab, tol=1e-10)


@pytest.mark.parametrize("lam", [0.5, 0.8])
def test_activation_where_optimal_is_passive(lam):
    rho = rho_at(lam, 0.0)
    values = [catalytic_protocol(rho, t, TC).dE_a for t in np.linspace(5, 200, 40)]
    assert abs(catalytic_protocol(rho, 1.0, TC).dE_star) < 1e-12
    assert min(values) < -1e-4


@pytest.mark.parametrize("lam", [0.2, 0.3])
def test_weak_correlations_stay_passive_at_default_temperatures(lam):
    # characterization: below lam ~ 0.35 the cavity step only heats A
    rho = rho_at(lam, 0.0)
    taus = np.concatenate([np.linspace(0.05, 20, 120), np.linspace(20, 200, 60)]) / TC_G
    assert min(catalytic_protocol(rho, t, TC).dE_a for t in taus) > 0


def test_zero_coupling_is_inert():
    setup = tavis_cummings_setup(1.0, 0.0, 3)
    rho = rho_at(0.4, 0.3)
    star = catalytic_protocol(rho, 1.0, setup).dE_star
    for t in (0.5, 3.0, 40.0):
        assert catalytic_protocol(rho, t, setup).dE_a == pytest.approx(star, abs=1e-10)
    cfg = replace(FAST, g=0.0)
    res = optimize_tau(rho, cfg, setup)
    assert res.tau_star == pytest.approx(cfg.tau_grid()[0])
    assert res.dE_c == pytest.approx(star, abs=1e-10)


def test_refinement_never_worse_than_scan():
    rho = rho_at(0.5, 0.1)
    coarse = optimize_tau(rho, replace(FAST, refine_iters=0), TC)
    fine = optimize_tau(rho, FAST, TC)
    assert fine.dE_c <= coarse.dE_c + 1e-15
    assert fine.dE_c <= fine.dE_star + 1e-12


def test_optimized_point_contracts():
    res = optimize_tau(rho_at(0.5, 0.0), FAST, TC)
    assert res.dE_c < -1e-4
    assert res.catalyst_residual <= 1e-9
    assert res.energy_residual <= 1e-9


def test_sweep_small_grid():
    cfg = replace(FAST, lambdas=(0.0, 0.5, 1.0), thetas=(0.0, 0.5, 1.0))
    records = sweep_lambda_theta(cfg)
    assert [(r.lam, r.theta) for r in records] == cfg.admissible_points()
    assert len(records) == 6
    origin = records[0]
    assert (origin.lam, origin.theta) == (0.0, 0.0)
    assert abs(origin.dE_star) < 1e-12 and abs(origin.dE_cat) < 1e-12
    for r in records:
        assert r.error is None
        assert r.advantage >= -1e-12
        assert r.bound <= r.dE_cat + 1e-7
        assert r.clausius_slack >= -1e-9
        assert r.identity_residual <= 1e-9
        if r.theta == 0:
            assert abs(r.dE_star) < 1e-10
        assert len(r.row()) == len(SWEEP_COLUMNS)
    assert min(r.dE_cat for r in records if r.theta == 0 and r.lam == 0.5) < 0


def test_sweep_parallel_matches_serial():
    cfg = replace(FAST, lambdas=(0.2, 0.6), thetas=(0.0, 0.3), with_bound=False)
    serial = sweep_lambda_theta(cfg)
    parallel = sweep_lambda_theta(replace(cfg, workers=2))
    np.testing.assert_array_equal(
        np.array([r.row() for r in serial], dtype=float),
        np.array([r.row() for r in parallel], dtype=float),
    )


def test_sweep_records_point_failures():
    cfg = replace(FAST, lambdas=(0.5,), thetas=(0.0,))
    records = sweep_lambda_theta(cfg, points=[(0.9, 0.9), (0.5, 0.0)])
    assert records[0].error is not None and np.isnan(records[0].dE_cat)
    assert records[1].error is None


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(tau_min=0.0)
    with pytest.raises(ValueError):
        SweepConfig(lambdas=())
    assert len(SweepConfig().admissible_points()) == 325
