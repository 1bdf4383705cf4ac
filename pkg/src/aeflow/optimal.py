"""Optimal local energy change of subsystem A under energy-preserving and
under arbitrary unitaries."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .entropic import ExchangeLedger, exchange_ledger
from .models import BlockStructure, CompositeSystem
from .operators import DimensionError, check_unitary, eig_hermitian


@dataclass(frozen=True)
class BlockAssignment:
    """Populations placed on one block's basis, lowest A energy first."""

    energy: float
    populations: np.ndarray
    local_energies: np.ndarray


@dataclass(frozen=True, eq=False)
class OptimalFlowResult:
    dE_a: float
    unitary: np.ndarray
    sigma_a: np.ndarray
    occupations: np.ndarray
    """Populations of A's energy levels, in ascending energy order."""
    assignments: tuple[BlockAssignment, ...] = ()


def _check_state(rho: np.ndarray, system: CompositeSystem) -> None:
    if len(system.local_dims) != 2:
        raise DimensionError("optimal flow is defined for bipartite systems")
    if rho.shape != (system.dim, system.dim):
        raise DimensionError(f"state of shape {rho.shape} on a system of dimension {system.dim}")


def block_dephase(rho: np.ndarray, blocks: BlockStructure) -> np.ndarray:
    """Keep only the blocks ``Pi_nu rho Pi_nu``."""
    if rho.shape != (blocks.dim, blocks.dim):
        raise DimensionError("state and block structure dimensions differ")
    out = np.zeros_like(rho, dtype=complex)
    for b in blocks.bases:
        p = b @ b.conj().T
        out += p @ rho @ p
    return out


def _a_basis(system: CompositeSystem) -> tuple[np.ndarray, np.ndarray]:
    return eig_hermitian(system.local_hamiltonians[0])


def optimal_energy_preserving(
    rho: np.ndarray, system: CompositeSystem, blocks: BlockStructure | None = None
) -> OptimalFlowResult:
    """Minimal ``E(sigma_A) - E(rho_A)`` over unitaries commuting with ``H0``.

    Inside each degenerate block the state is diagonalized and its
    eigenvalues, largest first, are placed on the block basis vectors in
    ascending order of A's local energy.
    """
    _check_state(rho, system)
    blocks = system.blocks() if blocks is None else blocks
    if blocks.dim != system.dim:
        raise DimensionError("block structure does not match the system")

    e_a, v_a = _a_basis(system)
    d_a, d_b = system.local_dims
    u = np.zeros((system.dim, system.dim), dtype=complex)
    occ = np.zeros(d_a)
    assignments = []
    for energy, basis, loc in zip(blocks.energies, blocks.bases, blocks.local_energies):
        sub = basis.conj().T @ rho @ basis
        p, w = np.linalg.eigh(0.5 * (sub + sub.conj().T))
        # stable descending order keeps the eigensolver's order among ties
        order = np.argsort(-p, kind="stable")
        p, w = p[order], w[:, order]
        target = basis[:, ::-1]
        u += target @ w.conj().T @ basis.conj().T
        # weight of each target vector on A's level i: <E_n| (|i><i| x 1) |E_n>
        t = target.reshape(d_a, d_b, -1)
        weights = np.einsum("ai,abn->in", v_a.conj(), t)
        occ += np.real(np.sum(np.abs(weights) ** 2 * p[None, :], axis=1))
        assignments.append(BlockAssignment(float(energy), p, loc[::-1].copy()))

    sigma_a = system.marginal(u @ rho @ u.conj().T, 0)
    dE = float(occ @ e_a) - system.local_energy(rho, 0)
    return OptimalFlowResult(dE, u, sigma_a, occ, tuple(assignments))


def optimal_arbitrary_unitary(rho: np.ndarray, system: CompositeSystem) -> OptimalFlowResult:
    """Minimal ``E(sigma_A) - E(rho_A)`` over all unitaries on AB.

    The global spectrum, sorted descending, is cut into consecutive groups
    of ``d_B`` values; group ``i`` is placed on A's ``i``-th lowest level.
    """
    _check_state(rho, system)
    d_a, d_b = system.local_dims
    e_a, v_a = _a_basis(system)
    _, v_b = eig_hermitian(system.local_hamiltonians[1])
    p, phi = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    p, phi = p[::-1], phi[:, ::-1]
    # column alpha(i, j) = i * d_B + j of kron(v_a, v_b) is |e_i^A, e_j^B>
    u = np.kron(v_a, v_b) @ phi.conj().T
    occ = p.reshape(d_a, d_b).sum(axis=1)
    sigma_a = system.marginal(u @ rho @ u.conj().T, 0)
    dE = float(occ @ e_a) - system.local_energy(rho, 0)
    return OptimalFlowResult(dE, u, sigma_a, occ)


def delta_e_for_unitary(rho: np.ndarray, u: np.ndarray, system: CompositeSystem) -> ExchangeLedger:
    """Energy/entropy ledger of ``rho -> u rho u^dagger``."""
    _check_state(rho, system)
    u = check_unitary(u)
    if u.shape != rho.shape:
        raise DimensionError("unitary and state dimensions differ")
    return exchange_ledger(rho, u @ rho @ u.conj().T, system)
