"""Entropies, mutual information and the energy-exchange identity.

All logarithms are natural (nats).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import CompositeSystem, gibbs_state
from .operators import DimensionError, partial_trace

CLIP_TOL = 1e-12
SUPPORT_TOL = 1e-10


def _spectrum(rho: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    return np.where(w < CLIP_TOL, 0.0, w)


def _xlogx(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    nz = p > 0
    out[nz] = p[nz] * np.log(p[nz])
    return out


def von_neumann_entropy(rho: np.ndarray) -> float:
    return float(-np.sum(_xlogx(_spectrum(rho))))


def relative_entropy(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``S(rho || sigma)``; ``inf`` when rho leaks onto sigma's kernel."""
    if rho.shape != sigma.shape:
        raise DimensionError(f"shape mismatch {rho.shape} vs {sigma.shape}")
    pr, vr = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    ps, vs = np.linalg.eigh(0.5 * (sigma + sigma.conj().T))
    pr = np.where(pr < CLIP_TOL, 0.0, pr)
    # overlap[i, j] = |<r_i|s_j>|^2
    overlap = np.abs(vr.conj().T @ vs) ** 2
    null = ps < CLIP_TOL
    if np.any(null) and float(pr @ overlap[:, null].sum(axis=1)) > SUPPORT_TOL:
        return float("inf")
    log_s = np.zeros_like(ps)
    log_s[~null] = np.log(ps[~null])
    cross = float(pr @ (overlap[:, ~null] @ log_s[~null]))
    return float(np.sum(_xlogx(pr))) - cross


def mutual_information(rho_ab: np.ndarray, d_a: int, d_b: int) -> float:
    """``S(A) + S(B) - S(AB)``."""
    dims = [d_a, d_b]
    s_a = von_neumann_entropy(partial_trace(rho_ab, dims, [0]))
    s_b = von_neumann_entropy(partial_trace(rho_ab, dims, [1]))
    return s_a + s_b - von_neumann_entropy(rho_ab)


def mutual_information_relent(rho_ab: np.ndarray, d_a: int, d_b: int) -> float:
    """Mutual information as ``S(rho_AB || rho_A (x) rho_B)``."""
    dims = [d_a, d_b]
    prod = np.kron(partial_trace(rho_ab, dims, [0]), partial_trace(rho_ab, dims, [1]))
    return relative_entropy(rho_ab, prod)


@dataclass(frozen=True)
class ExchangeLedger:
    """Energy and entropy bookkeeping for ``rho -> sigma`` on a bipartite system.

    ``relent_a``/``relent_b`` are ``S(sigma_x || rho_x)``, which equal
    ``S(sigma_x || gamma_x)`` whenever the initial marginals are thermal.
    """

    dE_a: float
    dE_b: float
    work: float
    dS_a: float
    dS_b: float
    dS_ab: float
    dI: float
    relent_a: float
    relent_b: float

    @property
    def relents(self) -> tuple[float, float]:
        return self.relent_a, self.relent_b


def exchange_ledger(rho_ab: np.ndarray, sigma_ab: np.ndarray, system: CompositeSystem) -> ExchangeLedger:
    if len(system.local_dims) != 2:
        raise DimensionError("exchange ledger needs a bipartite system")
    d_a, d_b = system.local_dims
    if rho_ab.shape != (d_a * d_b,) * 2 or sigma_ab.shape != rho_ab.shape:
        raise DimensionError("states do not match the system dimension")
    r = [system.marginal(rho_ab, k) for k in (0, 1)]
    s = [system.marginal(sigma_ab, k) for k in (0, 1)]
    h_a, h_b = system.local_hamiltonians
    dE_a = float(np.real(np.trace(h_a @ (s[0] - r[0]))))
    dE_b = float(np.real(np.trace(h_b @ (s[1] - r[1]))))
    dS_a = von_neumann_entropy(s[0]) - von_neumann_entropy(r[0])
    dS_b = von_neumann_entropy(s[1]) - von_neumann_entropy(r[1])
    dS_ab = von_neumann_entropy(sigma_ab) - von_neumann_entropy(rho_ab)
    return ExchangeLedger(
        dE_a=dE_a,
        dE_b=dE_b,
        work=dE_a + dE_b,
        dS_a=dS_a,
        dS_b=dS_b,
        dS_ab=dS_ab,
        dI=dS_a + dS_b - dS_ab,
        relent_a=relative_entropy(s[0], r[0]),
        relent_b=relative_entropy(s[1], r[1]),
    )


class NotThermalError(ValueError):
    """Initial marginals are not Gibbs states at the declared temperatures."""


def check_thermal_marginals(
    rho_ab: np.ndarray, system: CompositeSystem, beta_a: float, beta_b: float, tol: float = 1e-8
) -> None:
    for k, beta in enumerate((beta_a, beta_b)):
        gamma = gibbs_state(beta, system.local_hamiltonians[k])
        err = float(np.max(np.abs(system.marginal(rho_ab, k) - gamma)))
        if err > tol:
            raise NotThermalError(f"marginal {k} differs from Gibbs(beta={beta}) by {err:.3e}")


def exchange_identity_residual(
    rho_ab: np.ndarray,
    sigma_ab: np.ndarray,
    system: CompositeSystem,
    beta_a: float,
    beta_b: float,
) -> float:
    """Absolute residual of the exact energy-exchange identity

        (beta_A - beta_B) dE_A = dS_A + dS_B - beta_B W + S(sigma_A||gamma_A) + S(sigma_B||gamma_B)

    which holds for any channel output when the inputs are locally thermal.
    """
    check_thermal_marginals(rho_ab, system, beta_a, beta_b)
    led = exchange_ledger(rho_ab, sigma_ab, system)
    relents = sum(
        relative_entropy(system.marginal(sigma_ab, k), gibbs_state(beta, system.local_hamiltonians[k]))
        for k, beta in enumerate((beta_a, beta_b))
    )
    lhs = (beta_a - beta_b) * led.dE_a
    rhs = led.dS_a + led.dS_b - beta_b * led.work + relents
    return abs(lhs - rhs)


@dataclass(frozen=True)
class ClausiusCheck:
    lhs: float
    rhs: float
    satisfied: bool

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs


def clausius_bound_check(ledger: ExchangeLedger, beta_a: float, beta_b: float, tol: float = 1e-9) -> ClausiusCheck:
    """Compare ``dE_A (beta_A - beta_B)`` against ``dI - beta_B W``."""
    lhs = ledger.dE_a * (beta_a - beta_b)
    rhs = ledger.dI - beta_b * ledger.work
    return ClausiusCheck(lhs, rhs, lhs - rhs >= -tol)
