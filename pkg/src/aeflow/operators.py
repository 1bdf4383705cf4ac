"""Dense complex-matrix kernel shared by every other module.

Matrices are plain ``numpy.ndarray`` objects. Composite indices are
subsystem-major: for dimensions ``(d_A, d_B)`` the pair ``(i, j)`` maps to
``i * d_B + j``, which is what ``numpy.kron`` produces.
"""
from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
TRACE_TOL = 1e-12
PSD_TOL = 1e-12


class DimensionError(ValueError):
    """Operand shapes do not agree with the declared subsystem layout."""


class NotHermitianError(ValueError):
    pass


class NotUnitaryError(ValueError):
    pass


class InvalidStateError(ValueError):
    """Matrix is not a density matrix within tolerance."""


def _square(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def hermiticity_error(m: np.ndarray) -> float:
    """Max-norm of ``M - M^dagger`` relative to ``max(1, ||M||_max)``."""
    m = _square(m)
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    return float(np.max(np.abs(m - m.conj().T))) / scale if m.size else 0.0


def check_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    m = _square(m)
    err = hermiticity_error(m)
    if err > tol:
        raise NotHermitianError(f"matrix is not Hermitian (error {err:.3e} > {tol:.1e})")
    return m


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    u = _square(u)
    err = float(np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))))
    if err > tol:
        raise NotUnitaryError(f"matrix is not unitary (error {err:.3e} > {tol:.1e})")
    return u


def check_density(rho: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity of ``rho``."""
    rho = _square(rho)
    if hermiticity_error(rho) > HERMITIAN_TOL:
        raise InvalidStateError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL * max(1, rho.shape[0]):
        raise InvalidStateError(f"density matrix has trace {tr.real:.15g}")
    lmin = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    if lmin < -tol:
        raise InvalidStateError(f"density matrix has negative eigenvalue {lmin:.3e}")
    return rho


def is_density(rho: np.ndarray, tol: float = PSD_TOL) -> bool:
    try:
        check_density(rho, tol)
    except (InvalidStateError, DimensionError):
        return False
    return True


def tensor_product(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product, first operand most significant."""
    if not ops:
        raise ValueError("tensor_product needs at least one operand")
    return reduce(np.kron, (np.asarray(o) for o in ops))


def embed(op: np.ndarray, position: int, dims: Sequence[int]) -> np.ndarray:
    """Lift a local operator acting on ``dims[position]`` by identity padding."""
    dims = list(dims)
    if op.shape != (dims[position], dims[position]):
        raise DimensionError(f"operator shape {op.shape} does not match dimension {dims[position]}")
    left = int(np.prod(dims[:position], dtype=int))
    right = int(np.prod(dims[position + 1:], dtype=int))
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


def partial_trace(m: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    The kept subsystems stay in their original order regardless of the
    order given in ``keep``.
    """
    m = _square(m)
    dims = [int(d) for d in dims]
    n = len(dims)
    total = int(np.prod(dims, dtype=int))
    if total != m.shape[0]:
        raise DimensionError(f"dims {dims} do not factor a matrix of size {m.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {n} subsystems")

    t = m.reshape(dims + dims)
    # einsum labels: row index k -> k, column index k -> n + k; traced pairs share a label
    letters = [chr(ord("a") + i) for i in range(2 * n)]
    col = [letters[n + k] if k in keep else letters[k] for k in range(n)]
    row = letters[:n]
    out = [letters[k] for k in keep] + [letters[n + k] for k in keep]
    r = np.einsum("".join(row + col) + "->" + "".join(out), t)
    d_keep = int(np.prod([dims[k] for k in keep], dtype=int))
    return r.reshape(d_keep, d_keep)


def eig_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvector columns of ``h``."""
    h = check_hermitian(h, tol)
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return w, v


def propagator(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i h t)`` with hbar = 1."""
    w, v = eig_hermitian(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def expectation(op: np.ndarray, rho: np.ndarray) -> float:
    """Real part of ``Tr[op rho]``."""
    return float(np.real(np.einsum("ij,ji->", op, rho)))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _square(a), _square(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return 0.5 * float(np.sum(np.linalg.svd(a - b, compute_uv=False)))


def commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a @ b - b @ a)))


def projector(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(vec, vec.conj())


def basis_vector(index: int, dim: int) -> np.ndarray:
    e = np.zeros(dim, dtype=complex)
    e[index] = 1.0
    return e
