"""Lower bound on catalytic energy flow.

Minimize ``E(sigma_A) - E(rho_A)`` over bipartite states with
``S(sigma) >= S(rho)`` and ``Tr[H0 sigma] = Tr[H0 rho]``. Both operators
are diagonal in the local energy product basis and dephasing in that basis
can only raise entropy, so the optimum is diagonal there and has the form
``exp(-alpha H_A - lam H0) / Z`` with ``alpha >= 0`` whenever the entropy
constraint binds. If it does not bind, the optimum is the maximum-entropy
point of the linear program's optimal face (the ``alpha -> inf`` limit).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq, linprog
from scipy.special import logsumexp

from .entropic import von_neumann_entropy
from .models import CompositeSystem
from .operators import DimensionError, eig_hermitian

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-7


class BoundConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class BoundResult:
    dE_bound: float
    sigma: np.ndarray
    alpha: float
    lam: float
    entropy_residual: float
    energy_residual: float
    entropy_binding: bool
    converged: bool = True


def _product_basis(system: CompositeSystem) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Local A energies, total free energies and the product eigenbasis."""
    if len(system.local_dims) != 2:
        raise DimensionError("the bound is defined for bipartite systems")
    e_a, v_a = eig_hermitian(system.local_hamiltonians[0])
    e_b, v_b = eig_hermitian(system.local_hamiltonians[1])
    a = np.repeat(e_a, len(e_b))
    h = (e_a[:, None] + e_b[None, :]).ravel()
    return a, h, np.kron(v_a, v_b)


def _family(alpha: float, lam: float, a: np.ndarray, h: np.ndarray) -> np.ndarray:
    logits = -alpha * a - lam * h
    return np.exp(logits - logsumexp(logits))


def _shannon(p: np.ndarray) -> float:
    nz = p > 0
    return float(-np.sum(p[nz] * np.log(p[nz])))


def exponential_family_state(alpha: float, lam: float, system: CompositeSystem) -> np.ndarray:
    """``exp(-(alpha H_A (x) 1 + lam H0)) / Z`` on a bipartite system."""
    if not (np.isfinite(alpha) and np.isfinite(lam)):
        raise ValueError("multipliers must be finite")
    a, h, v = _product_basis(system)
    p = _family(alpha, lam, a, h)
    return (v * p) @ v.conj().T


def _lambda_for_energy(alpha: float, a: np.ndarray, h: np.ndarray, energy: float) -> float:
    """Tilt ``lam`` at which the family at ``alpha`` has mean ``h`` equal to ``energy``."""
    def f(lam):
        return float(_family(alpha, lam, a, h) @ h) - energy

    lo, hi = -1.0, 1.0
    while f(lo) < 0:
        lo *= 2.0
        if lo < -1e15:
            raise BoundConvergenceError("energy above the reachable range")
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e15:
            raise BoundConvergenceError("energy below the reachable range")
    return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def _maxent_fit(features: np.ndarray, targets: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Maximum-entropy distribution on ``support`` with ``features @ p = targets``.

    Newton's method on the convex dual ``log Z(t) + t . targets``.
    """
    f = features[:, support]
    theta = np.zeros(f.shape[0])

    def dual(t):
        logits = -t @ f
        return float(logsumexp(logits) + t @ targets)

    for _ in range(200):
        logits = -theta @ f
        q = np.exp(logits - logsumexp(logits))
        mean = f @ q
        grad = targets - mean
        if np.max(np.abs(grad)) < 1e-14:
            break
        centered = f - mean[:, None]
        hess = (centered * q) @ centered.T
        step = -np.linalg.pinv(hess, rcond=1e-12) @ grad
        t, d0 = 1.0, dual(theta)
        while dual(theta + t * step) > d0 + 1e-4 * t * float(grad @ step) and t > 1e-12:
            t *= 0.5
        theta = theta + t * step
    out = np.zeros(features.shape[1])
    logits = -theta @ f
    out[support] = np.exp(logits - logsumexp(logits))
    return out


def _lp_face_point(a: np.ndarray, h: np.ndarray, energy: float) -> tuple[float, np.ndarray]:
    """Optimal value of min a.p over the energy slice, and the face's max-entropy point."""
    n = len(a)
    a_eq = np.vstack([np.ones(n), h])
    b_eq = np.array([1.0, energy])
    res = linprog(a, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise BoundConvergenceError(f"linear program failed: {res.message}")
    best = float(res.fun)
    face_eq = np.vstack([a_eq, a])
    face_b = np.append(b_eq, best)
    support = np.zeros(n, dtype=bool)
    for i in range(n):
        c = np.zeros(n)
        c[i] = -1.0
        r = linprog(c, A_eq=face_eq, b_eq=face_b, bounds=(0, None), method="highs")
        support[i] = r.status == 0 and -r.fun > 1e-12
    point = _maxent_fit(np.vstack([a, h]), np.array([best, energy]), support)
    return best, point


def _newton(a, h, s0, e0, x0, max_iter=100) -> tuple[np.ndarray, bool]:
    """Levenberg-Marquardt damped Newton for ``S = s0``, ``<h> = e0``."""
    def resid(x):
        p = _family(x[0], x[1], a, h)
        return np.array([_shannon(p) - s0, float(p @ h) - e0]), p

    x = np.array(x0, dtype=float)
    r, p = resid(x)
    damping = 1e-6
    for _ in range(max_iter):
        if np.max(np.abs(r)) < 1e-13:
            return x, True
        ma, mh = p @ a, p @ h
        va, vh = p @ (a - ma) ** 2, p @ (h - mh) ** 2
        cov = p @ ((a - ma) * (h - mh))
        jac = np.array([[-x[0] * va - x[1] * cov, -x[0] * cov - x[1] * vh], [-cov, -vh]])
        jtj = jac.T @ jac
        while True:
            step = np.linalg.solve(jtj + damping * np.diag(np.diag(jtj) + 1e-300), -jac.T @ r)
            r_new, p_new = resid(x + step)
            if np.linalg.norm(r_new) < np.linalg.norm(r):
                x, r, p = x + step, r_new, p_new
                damping = max(damping / 10, 1e-15)
                break
            damping *= 10
            if damping > 1e12:
                return x, False
    return x, bool(np.max(np.abs(r)) < 1e-13)


def _nested(a, h, s0, e0) -> tuple[float, float]:
    """Bracketed solve: along the fixed-energy curve entropy decreases in alpha."""
    def entropy_at(alpha):
        lam = _lambda_for_energy(alpha, a, h, e0)
        return _shannon(_family(alpha, lam, a, h)) - s0

    hi = 1.0
    while entropy_at(hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            raise BoundConvergenceError("entropy target not reached along the energy curve")
    if entropy_at(0.0) < 0:
        raise BoundConvergenceError("entropy target exceeds the thermal maximum")
    alpha = brentq(entropy_at, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return alpha, _lambda_for_energy(alpha, a, h, e0)


def catalytic_bound(
    rho_ab: np.ndarray,
    system: CompositeSystem,
    initial: tuple[float, float] | None = None,
    max_iter: int = 100,
) -> BoundResult:
    """Entropy- and energy-constrained lower bound on ``E(sigma_A) - E(rho_A)``.

    ``initial`` seeds the Newton iteration; by default ``(0, beta_eff)``
    with ``beta_eff`` matching the energy of ``rho_ab``.
    """
    a, h, v = _product_basis(system)
    if rho_ab.shape != (len(a), len(a)):
        raise DimensionError("state does not match the system")
    h0_op = (v * h) @ v.conj().T
    ha_op = (v * a) @ v.conj().T
    s0 = von_neumann_entropy(rho_ab)
    e0 = float(np.real(np.trace(h0_op @ rho_ab)))
    ea0 = float(np.real(np.trace(ha_op @ rho_ab)))

    width = float(np.ptp(h)) if len(h) else 0.0
    e_tol = 1e-12 * max(1.0, width)
    if width == 0 or e0 <= h.min() + e_tol or e0 >= h.max() - e_tol:
        # extreme energy: only the lowest/highest H0 eigenspace is feasible
        target = h.min() if e0 <= h.min() + e_tol else h.max()
        support = np.abs(h - target) <= e_tol
        p = _maxent_fit(a[None, :], np.array([a[support].min()]), support & (a == a[support].min()))
        binding, alpha, lam, converged = False, float("inf"), float("nan"), True
    else:
        _, face = _lp_face_point(a, h, e0)
        if _shannon(face) >= s0 - 1e-12:
            p, binding, alpha, lam, converged = face, False, float("inf"), float("nan"), True
        else:
            binding = True
            x0 = initial if initial is not None else (0.0, _lambda_for_energy(0.0, a, h, e0))
            x, converged = _newton(a, h, s0, e0, x0, max_iter=max_iter)
            if not converged or x[0] < 0:
                try:
                    x = np.array(_nested(a, h, s0, e0))
                    converged = True
                except BoundConvergenceError as exc:
                    log.warning("bound root-finder failed: %s", exc)
                    converged = False
            alpha, lam = float(x[0]), float(x[1])
            p = _family(alpha, lam, a, h)

    sigma = (v * p) @ v.conj().T
    return BoundResult(
        dE_bound=float(p @ a) - ea0,
        sigma=sigma,
        alpha=alpha,
        lam=lam,
        entropy_residual=_shannon(p) - s0,
        energy_residual=float(p @ h) - e0,
        entropy_binding=binding,
        converged=converged,
    )


@dataclass
class OrderingReport:
    passed: bool
    worst_slack: float
    points: int
    violations: list[dict]


def verify_bound_ordering(
    sweep_table: Iterable, bounds_table: Sequence[float] | None = None, tol: float = FEASIBILITY_TOL
) -> OrderingReport:
    """Check ``bound <= dE_cat + tol`` on every sweep record.

    ``worst_slack`` is ``min(dE_cat - bound)``; negative beyond ``-tol``
    means a violation.
    """
    records = list(sweep_table)
    bounds = [r.bound for r in records] if bounds_table is None else list(bounds_table)
    if len(bounds) != len(records):
        raise DimensionError("sweep and bound tables have different lengths")
    worst = float("inf")
    violations = []
    for rec, b in zip(records, bounds):
        if not (np.isfinite(b) and np.isfinite(rec.dE_cat)):
            violations.append({"lambda": rec.lam, "theta": rec.theta, "reason": "missing value"})
            continue
        slack = rec.dE_cat - b
        worst = min(worst, slack)
        if slack < -tol:
            violations.append(
                {
                    "lambda": rec.lam,
                    "theta": rec.theta,
                    "bound": b,
                    "dE_cat": rec.dE_cat,
                    "dE_star": rec.dE_star,
                    "slack": slack,
                    "catalyst_residual": rec.catalyst_residual,
                    "energy_residual": rec.energy_residual,
                }
            )
    return OrderingReport(not violations, worst, len(records), violations)
