"""Seeded random states and unitaries for property checks."""
from __future__ import annotations

import numpy as np

from .models import BlockStructure, CompositeSystem, gibbs_state


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream; reproducible across platforms."""
    return np.random.Generator(np.random.Philox(int(seed)))


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def haar_unitaries(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Batch of ``n`` Haar unitaries, shape ``(n, d, d)``."""
    z = (rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=1, axis2=2)
    return q * (diag / np.abs(diag))[:, None, :]


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Hilbert-Schmidt-type random state of the given rank."""
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.real(np.trace(rho))


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (g + g.conj().T)


def random_block_unitary(blocks: BlockStructure, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary inside each degenerate block; commutes with the free Hamiltonian."""
    d = blocks.dim
    u = np.zeros((d, d), dtype=complex)
    for b in blocks.bases:
        w = haar_unitary(b.shape[1], rng)
        u += b @ w @ b.conj().T
    return u


def random_thermal_marginal_state(
    system: CompositeSystem, beta_a: float, beta_b: float, rng: np.random.Generator, strength: float = 1.0
) -> np.ndarray:
    """Bipartite state whose marginals are exactly ``gamma_A`` and ``gamma_B``.

    A random correlation term with vanishing partial traces is added to the
    thermal product and scaled down until the result is positive.
    """
    d_a, d_b = system.local_dims
    g_a = gibbs_state(beta_a, system.local_hamiltonians[0])
    g_b = gibbs_state(beta_b, system.local_hamiltonians[1])
    prod = np.kron(g_a, g_b)

    x = random_hermitian(d_a * d_b, rng).reshape(d_a, d_b, d_a, d_b)
    # remove both marginals of x (local-traceless projection)
    tr_b = np.einsum("ijkj->ik", x)
    tr_a = np.einsum("ijil->jl", x)
    tot = np.einsum("ijij->", x)
    x = x - np.einsum("ik,jl->ijkl", tr_b, np.eye(d_b)) / d_b
    x = x - np.einsum("ik,jl->ijkl", np.eye(d_a), tr_a) / d_a
    x = x + tot * np.einsum("ik,jl->ijkl", np.eye(d_a), np.eye(d_b)) / (d_a * d_b)
    x = x.reshape(d_a * d_b, d_a * d_b)

    # largest t with prod + t x >= 0, via the generalized eigenproblem
    w_p, v_p = np.linalg.eigh(prod)
    inv_sqrt = (v_p / np.sqrt(w_p)) @ v_p.conj().T
    lam_min = float(np.linalg.eigvalsh(inv_sqrt @ x @ inv_sqrt)[0])
    t_max = -1.0 / lam_min if lam_min < 0 else 1.0
    t = strength * rng.uniform(0.0, 1.0) * t_max
    rho = prod + t * x
    return 0.5 * (rho + rho.conj().T)


def random_block_unitaries(blocks: BlockStructure, n: int, rng: np.random.Generator) -> np.ndarray:
    """Batch version of :func:`random_block_unitary`, shape ``(n, d, d)``."""
    u = np.zeros((n, blocks.dim, blocks.dim), dtype=complex)
    for b in blocks.bases:
        w = haar_unitaries(n, b.shape[1], rng)
        u += np.einsum("im,nmk,jk->nij", b, w, b.conj())
    return u


def local_energy_changes(rho: np.ndarray, unitaries: np.ndarray, h_local: np.ndarray) -> np.ndarray:
    """``Tr[h (U rho U^dagger - rho)]`` for a batch of unitaries; ``h`` acts on the full space."""
    heis = np.einsum("nki,kl,nlj->nij", unitaries.conj(), h_local, unitaries)
    return np.real(np.einsum("nij,ji->n", heis, rho) - np.trace(h_local @ rho))
