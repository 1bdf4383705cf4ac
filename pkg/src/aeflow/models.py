"""Hamiltonians, thermal and correlated states, and the degenerate-block
structure of a free Hamiltonian."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .operators import (
    DimensionError,
    basis_vector,
    check_hermitian,
    eig_hermitian,
    embed,
    partial_trace,
    projector,
)

DEGENERACY_TOL = 1e-9
BETA_MAX_FACTOR = 1e4


@dataclass(frozen=True, eq=False)
class CompositeSystem:
    """Non-interacting subsystems with local Hamiltonians.

    ``h0`` is the sum of the local Hamiltonians lifted to the full space.
    """

    local_dims: tuple[int, ...]
    local_hamiltonians: tuple[np.ndarray, ...]
    h0: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.local_dims)
        hams = tuple(check_hermitian(np.asarray(h, dtype=complex)) for h in self.local_hamiltonians)
        if len(dims) != len(hams):
            raise DimensionError("one local Hamiltonian per subsystem is required")
        for d, h in zip(dims, hams):
            if h.shape != (d, d):
                raise DimensionError(f"local Hamiltonian of shape {h.shape} for dimension {d}")
        object.__setattr__(self, "local_dims", dims)
        object.__setattr__(self, "local_hamiltonians", hams)
        h0 = sum(embed(h, k, dims) for k, h in enumerate(hams))
        object.__setattr__(self, "h0", np.asarray(h0, dtype=complex))

    @property
    def dim(self) -> int:
        return int(np.prod(self.local_dims))

    def local_operator(self, k: int) -> np.ndarray:
        """``H_k`` lifted to the composite space."""
        return embed(self.local_hamiltonians[k], k, self.local_dims)

    def marginal(self, rho: np.ndarray, k: int) -> np.ndarray:
        return partial_trace(rho, self.local_dims, [k])

    def local_energy(self, rho: np.ndarray, k: int) -> float:
        """``E(rho_k) = Tr[H_k rho_k]`` for a state on the full space."""
        m = self.marginal(rho, k)
        return float(np.real(np.trace(self.local_hamiltonians[k] @ m)))

    def blocks(self, tol: float = DEGENERACY_TOL) -> "BlockStructure":
        """Degenerate blocks of ``h0`` with bases ordered by subsystem-0 energy."""
        return degenerate_blocks(self.h0, tol=tol, local_op=self.local_operator(0))


def qubit_hamiltonian(epsilon: float = 1.0) -> np.ndarray:
    """``epsilon |1><1|`` with ``|0>`` the ground state."""
    return np.diag([0.0, float(epsilon)]).astype(complex)


def two_qubit_system(epsilon_a: float = 1.0, epsilon_b: float | None = None) -> CompositeSystem:
    epsilon_b = epsilon_a if epsilon_b is None else epsilon_b
    return CompositeSystem((2, 2), (qubit_hamiltonian(epsilon_a), qubit_hamiltonian(epsilon_b)))


def gibbs_state(beta: float, h: np.ndarray, beta_max: float | None = None) -> np.ndarray:
    """Thermal state ``exp(-beta h) / Z``.

    ``beta`` is capped at ``beta_max`` (default ``1e4`` over the spectral
    width of ``h``), at which point the state is the ground projector to
    machine precision.
    """
    beta = float(beta)
    if not np.isfinite(beta) or beta < 0:
        raise ValueError(f"inverse temperature must be finite and non-negative, got {beta}")
    w, v = eig_hermitian(h)
    width = float(w[-1] - w[0])
    if beta_max is None:
        beta_max = BETA_MAX_FACTOR / width if width > 0 else np.inf
    beta = min(beta, beta_max)
    logp = -beta * (w - w[0])
    p = np.exp(logp - logsumexp(logp))
    return (v * p) @ v.conj().T


def bell_states() -> tuple[np.ndarray, np.ndarray]:
    """Projectors onto ``(|00>+|11>)/sqrt2`` and ``(|01>-|10>)/sqrt2``."""
    s = 1 / np.sqrt(2)
    phi_plus = s * (basis_vector(0, 4) + basis_vector(3, 4))
    psi_minus = s * (basis_vector(1, 4) - basis_vector(2, 4))
    return projector(phi_plus), projector(psi_minus)


@dataclass(frozen=True)
class CorrelatedStateParams:
    lam: float
    theta: float
    beta_a: float = 2.0
    beta_b: float = 0.5
    epsilon: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.lam <= 1.0 and 0.0 <= self.theta <= 1.0):
            raise ValueError(f"lambda={self.lam}, theta={self.theta} must lie in [0, 1]")
        if self.lam + self.theta > 1.0 + 1e-12:
            raise ValueError(f"lambda + theta = {self.lam + self.theta} exceeds 1")
        if self.beta_a < 0 or self.beta_b < 0:
            raise ValueError("inverse temperatures must be non-negative")
        if self.beta_a < self.beta_b:
            raise ValueError("subsystem A must be the colder one (beta_a >= beta_b)")


def rho_lambda_theta(p: CorrelatedStateParams) -> np.ndarray:
    """Mixture of a thermal product state with the Bell states phi+ and psi-."""
    h = qubit_hamiltonian(p.epsilon)
    gamma_ab = np.kron(gibbs_state(p.beta_a, h), gibbs_state(p.beta_b, h))
    phi_plus, psi_minus = bell_states()
    w = max(0.0, 1.0 - p.lam - p.theta)
    return w * gamma_ab + p.lam * phi_plus + p.theta * psi_minus


def effective_inverse_temperature(rho: np.ndarray, h: np.ndarray, tol: float = 1e-10) -> float:
    """Inverse temperature at which a qubit state is thermal for ``h``.

    A population-inverted state yields a negative value.
    """
    w, v = eig_hermitian(h)
    if w.shape != (2,):
        raise DimensionError("effective temperature is defined for qubits only")
    gap = float(w[1] - w[0])
    if gap <= tol:
        raise ValueError("Hamiltonian has a degenerate spectrum")
    r = v.conj().T @ rho @ v
    if abs(r[0, 1]) > tol:
        raise ValueError("state is not diagonal in the energy basis")
    p0, p1 = float(r[0, 0].real), float(r[1, 1].real)
    if min(p0, p1) <= tol:
        raise ValueError("state is rank-deficient; its temperature is zero")
    return float(np.log(p0 / p1) / gap)


def marginal_inverse_temperatures(rho: np.ndarray, system: "CompositeSystem") -> tuple[float, ...]:
    """Effective inverse temperature of every qubit marginal of ``rho``."""
    return tuple(
        effective_inverse_temperature(system.marginal(rho, k), system.local_hamiltonians[k])
        for k in range(len(system.local_dims))
    )


def tavis_cummings(epsilon: float, g: float, n_fock: int) -> tuple[np.ndarray, np.ndarray]:
    """Resonant two-atom Tavis-Cummings model on ``A (x) B (x) C``.

    Returns the free Hamiltonian and the exchange coupling. The cavity is
    truncated to ``n_fock`` levels; the coupling still conserves total
    excitation number exactly.
    """
    if int(n_fock) != n_fock or n_fock < 2:
        raise ValueError(f"n_fock must be an integer >= 2, got {n_fock}")
    n_fock = int(n_fock)
    system = tavis_cummings_system(epsilon, n_fock)
    dims = system.local_dims
    a = np.diag(np.sqrt(np.arange(1, n_fock)), k=1).astype(complex)
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    a_full = embed(a, 2, dims)
    v = np.zeros((system.dim, system.dim), dtype=complex)
    for k in (0, 1):
        s = embed(lower, k, dims)
        v += a_full @ s.conj().T + a_full.conj().T @ s
    return system.h0, float(g) * v


def tavis_cummings_system(epsilon: float, n_fock: int) -> CompositeSystem:
    """Free part of the Tavis-Cummings model as a three-part composite."""
    cavity = np.diag(float(epsilon) * np.arange(n_fock)).astype(complex)
    return CompositeSystem(
        (2, 2, int(n_fock)),
        (qubit_hamiltonian(epsilon), qubit_hamiltonian(epsilon), cavity),
    )


@dataclass(frozen=True, eq=False)
class BlockStructure:
    """Degenerate eigenspaces of a free Hamiltonian.

    ``bases[nu]`` holds the block's basis vectors as columns, ordered by
    non-increasing ``local_energies[nu]`` (ties keep composite-index order).
    """

    energies: np.ndarray
    multiplicities: tuple[int, ...]
    bases: tuple[np.ndarray, ...]
    local_energies: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return int(sum(self.multiplicities))

    @property
    def projectors(self) -> list[np.ndarray]:
        return [b @ b.conj().T for b in self.bases]

    def __len__(self) -> int:
        return len(self.multiplicities)


def _is_diagonal(m: np.ndarray, tol: float) -> bool:
    off = m - np.diag(np.diag(m))
    return float(np.max(np.abs(off), initial=0.0)) <= tol * max(1.0, float(np.max(np.abs(m), initial=0.0)))


def _snap(values: np.ndarray, tol: float) -> np.ndarray:
    """Replace values closer than ``tol`` to a smaller one by that representative."""
    out = np.array(values, dtype=float)
    order = np.argsort(out, kind="stable")
    rep = None
    for i in order:
        if rep is None or out[i] - rep > tol:
            rep = out[i]
        out[i] = rep
    return out


def degenerate_blocks(
    h0: np.ndarray, tol: float = DEGENERACY_TOL, local_op: np.ndarray | None = None
) -> BlockStructure:
    """Group the spectrum of ``h0`` into degenerate blocks.

    When ``local_op`` (commuting with ``h0``) is given, each block basis is
    chosen to diagonalize it, and its expectation values order the basis.
    A diagonal ``h0`` keeps the computational basis.
    """
    h0 = check_hermitian(h0)
    d = h0.shape[0]
    if _is_diagonal(h0, 1e-12):
        w = np.real(np.diag(h0)).copy()
        v = np.eye(d, dtype=complex)
    else:
        w, v = eig_hermitian(h0)
    order = np.argsort(w, kind="stable")
    w, v = w[order], v[:, order]
    scale = tol * max(1.0, float(np.max(np.abs(w), initial=0.0)))

    groups: list[list[int]] = []
    for k in range(d):
        if groups and w[k] - w[groups[-1][0]] <= scale:
            groups[-1].append(k)
        else:
            groups.append([k])

    energies, mults, bases, locals_ = [], [], [], []
    for grp in groups:
        b = v[:, grp]
        if local_op is not None:
            m = b.conj().T @ local_op @ b
            if _is_diagonal(m, 1e-12):
                loc = np.real(np.diag(m))
            else:
                loc, rot = eig_hermitian(0.5 * (m + m.conj().T))
                b = b @ rot
        else:
            loc = np.zeros(len(grp))
        snapped = _snap(loc, tol * max(1.0, float(np.max(np.abs(loc), initial=0.0))))
        perm = np.argsort(-snapped, kind="stable")
        energies.append(float(np.mean(w[grp])))
        mults.append(len(grp))
        bases.append(b[:, perm])
        locals_.append(np.asarray(loc)[perm])
    return BlockStructure(np.array(energies), tuple(mults), tuple(bases), tuple(locals_))
