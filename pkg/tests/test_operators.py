import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aeflow.operators import (
    DimensionError,
    InvalidStateError,
    NotHermitianError,
    NotUnitaryError,
    basis_vector,
    check_density,
    check_unitary,
    eig_hermitian,
    embed,
    is_density,
    partial_trace,
    projector,
    propagator,
    tensor_product,
    trace_distance,
)
from aeflow.sampling import haar_unitary, random_density, random_hermitian
from oracles import kron_loop
from strategies import rng_from, seeds


def test_tensor_identity():
    assert np.array_equal(tensor_product(np.eye(2), np.eye(2)), np.eye(4))


def test_tensor_basis_bookkeeping():
    m = tensor_product(projector(basis_vector(0, 2)), projector(basis_vector(1, 2)))
    expected = np.zeros((4, 4))
    expected[1, 1] = 1
    assert np.array_equal(m, expected)


@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_tensor_matches_four_index_loop(seed, da, db):
    rng = rng_from(seed)
    a = rng.standard_normal((da, da)) + 1j * rng.standard_normal((da, da))
    b = rng.standard_normal((db, db)) + 1j * rng.standard_normal((db, db))
    assert np.allclose(tensor_product(a, b), kron_loop(a, b), atol=1e-14)


def test_tensor_product_is_associative(rng):
    a, b, c = (random_hermitian(d, rng) for d in (2, 3, 2))
    assert np.allclose(tensor_product(a, b, c), np.kron(a, np.kron(b, c)))


def test_partial_trace_bell_marginal():
    phi = projector(np.array([1, 0, 0, 1]) / np.sqrt(2))
    assert np.allclose(partial_trace(phi, [2, 2], [0]), np.eye(2) / 2, atol=1e-15)


def test_partial_trace_product_factor(rng):
    a = random_hermitian(2, rng)
    b = random_density(3, rng)
    assert np.allclose(partial_trace(np.kron(a, b), [2, 3], [0]), a, atol=1e-13)


@given(seeds)
def test_partial_trace_tripartite_product(seed):
    rng = rng_from(seed)
    a, b, c = random_density(2, rng), random_density(3, rng), random_density(2, rng)
    assert np.max(np.abs(partial_trace(tensor_product(a, b, c), [2, 3, 2], [2]) - c)) <= 1e-12


@given(seeds)
def test_partial_trace_preserves_trace_and_positivity(seed):
    rng = rng_from(seed)
    rho = random_density(12, rng)
    for keep in ([0], [1], [2], [0, 2], [1, 2]):
        red = partial_trace(rho, [2, 3, 2], keep)
        assert abs(np.trace(red) - 1) < 1e-12
        assert is_density(red)


def test_partial_trace_keep_order_is_canonical(rng):
    rho = random_density(6, rng)
    assert np.allclose(partial_trace(rho, [2, 3], [1, 0]), rho)


def test_partial_trace_dimension_mismatch():
    with pytest.raises(DimensionError):
        partial_trace(np.eye(4), [2, 3], [0])
    with pytest.raises(DimensionError):
        partial_trace(np.eye(4), [2, 2], [5])


def test_eig_diagonal_and_pauli():
    w, _ = eig_hermitian(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(w, [1, 2, 3])
    w, _ = eig_hermitian(np.array([[0, 1], [1, 0]], dtype=complex))
    assert np.allclose(w, [-1, 1])


@given(seeds, st.integers(1, 8))
def test_eig_reconstruction(seed, d):
    h = random_hermitian(d, rng_from(seed))
    w, v = eig_hermitian(h)
    assert np.all(np.diff(w) >= 0)
    assert np.allclose(v.conj().T @ v, np.eye(d), atol=1e-10)
    assert np.allclose((v * w) @ v.conj().T, h, atol=1e-10)


def test_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        eig_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))


def test_propagator_diagonal():
    eps, t = 1.3, 0.7
    u = propagator(np.diag([0, eps]).astype(complex), t)
    assert np.allclose(u, np.diag([1, np.exp(-1j * eps * t)]))
    assert np.allclose(propagator(np.diag([0, eps]).astype(complex), 0.0), np.eye(2))


@given(seeds, st.floats(-10, 10))
def test_propagator_group_property(seed, t):
    h = random_hermitian(5, rng_from(seed))
    assert np.allclose(propagator(h, t) @ propagator(h, -t), np.eye(5), atol=1e-10)
    check_unitary(propagator(h, t))


def test_trace_distance_trivial():
    rho = np.diag([0.3, 0.7])
    assert trace_distance(rho, rho) == 0
    assert trace_distance(np.diag([1.0, 0]), np.diag([0, 1.0])) == pytest.approx(1.0)


@given(seeds)
def test_trace_distance_spectral_oracle(seed):
    rng = rng_from(seed)
    a, b = random_density(4, rng), random_density(4, rng)
    d = trace_distance(a, b)
    assert 0 <= d <= 1
    assert d == pytest.approx(0.5 * np.sum(np.abs(np.linalg.eigvalsh(a - b))), abs=1e-12)


def test_trace_distance_shape_mismatch():
    with pytest.raises(DimensionError):
        trace_distance(np.eye(2) / 2, np.eye(3) / 3)


def test_embed_places_operator(rng):
    h = random_hermitian(3, rng)
    assert np.allclose(embed(h, 1, [2, 3, 2]), np.kron(np.eye(2), np.kron(h, np.eye(2))))
    with pytest.raises(DimensionError):
        embed(h, 0, [2, 3])


def test_state_validation(rng):
    check_density(random_density(3, rng))
    with pytest.raises(InvalidStateError):
        check_density(np.diag([1.5, -0.5]))
    with pytest.raises(InvalidStateError):
        check_density(np.eye(2))
    with pytest.raises(NotUnitaryError):
        check_unitary(2 * np.eye(2))
    check_unitary(haar_unitary(4, rng))
