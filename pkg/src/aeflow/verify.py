"""Cross-module invariant suites behind the ``verify`` scenario."""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .bound import FEASIBILITY_TOL
from .catalysis import (
    SweepConfig,
    catalytic_protocol,
    fixed_point_catalyst,
    sweep_lambda_theta,
    tavis_cummings_setup,
    toy_setup,
    toy_state,
)
from .entropic import clausius_bound_check, exchange_identity_residual, exchange_ledger
from .models import CorrelatedStateParams, rho_lambda_theta, two_qubit_system
from .operators import partial_trace, trace_distance
from .optimal import block_dephase, optimal_energy_preserving
from .sampling import (
    haar_unitary,
    local_energy_changes,
    random_block_unitaries,
    random_block_unitary,
    random_density,
    random_thermal_marginal_state,
)

FAULTS = ("non-energy-preserving",)


@dataclass(frozen=True)
class PropertyResult:
    name: str
    trials: int
    worst_residual: float
    tolerance: float
    passed: bool

    def as_dict(self) -> dict:
        return asdict(self)


def _result(name: str, trials: int, residuals, tol: float) -> PropertyResult:
    worst = float(np.max(residuals)) if len(residuals) else 0.0
    return PropertyResult(name, trials, worst, tol, bool(np.isfinite(worst) and worst <= tol))


def check_toy(epsilon: float = 1.0) -> PropertyResult:
    setup = toy_setup(epsilon)
    res = catalytic_protocol(toy_state(), 0.0, setup)
    sys_ab = setup.system_ab
    errs = [
        abs(res.dE_a + epsilon / 4),
        np.max(np.abs(sys_ab.marginal(res.sigma_ab_step1, 0) - np.diag([0.75, 0.25]))),
        np.max(np.abs(sys_ab.marginal(res.sigma_ab_step1, 1) - np.diag([0.25, 0.75]))),
        res.catalyst_residual,
        trace_distance(res.catalyst.omega, np.eye(2) / 2),
    ]
    return _result("toy_exactness", 1, [max(errs)], 1e-12)


def check_dephasing_invariance(rng, trials: int = 500, fault: str | None = None) -> PropertyResult:
    """Energy-preserving unitaries cannot use coherences between blocks."""
    system = two_qubit_system()
    blocks = system.blocks()
    h_a = system.local_operator(0)
    res = []
    for _ in range(trials):
        rho = random_density(4, rng)
        rho_d = block_dephase(rho, blocks)
        u_star = optimal_energy_preserving(rho, system, blocks).unitary
        if fault == "non-energy-preserving":
            u_star = haar_unitary(4, rng)
        us = np.stack([random_block_unitary(blocks, rng), u_star])
        diff = local_energy_changes(rho, us, h_a) - local_energy_changes(rho_d, us, h_a)
        res.append(np.max(np.abs(diff)))
    return _result("dephasing_invariance", trials, res, 1e-10)


def check_energy_preserving_optimality(rng, states: int = 50, samples: int = 2000) -> PropertyResult:
    """No sampled energy-preserving unitary beats the closed-form optimum."""
    system = two_qubit_system()
    blocks = system.blocks()
    h_a = system.local_operator(0)
    res = []
    for _ in range(states):
        rho = random_density(4, rng)
        star = optimal_energy_preserving(rho, system, blocks).dE_a
        sampled = local_energy_changes(rho, random_block_unitaries(blocks, samples, rng), h_a)
        res.append(max(0.0, star - float(sampled.min())))
    return _result("energy_preserving_optimality", states * samples, res, 1e-10)


def exchange_trials(rng, trials: int = 1000, n_fock: int = 3, g: float = 0.1):
    """Yield ``(identity_residual, clausius_slack)`` over mixed channel types.

    Trials cycle through block unitaries, Haar unitaries and the catalytic
    protocol (cavity step alone and followed by the optimal unitary).
    """
    system = two_qubit_system()
    blocks = system.blocks()
    setup = tavis_cummings_setup(1.0, g, n_fock)
    for k in range(trials):
        beta_b = rng.uniform(0.05, 2.0)
        beta_a = beta_b + rng.uniform(0.0, 2.0)
        rho = random_thermal_marginal_state(system, beta_a, beta_b, rng)
        kind = k % 4
        if kind == 0:
            sigma = (u := random_block_unitary(blocks, rng)) @ rho @ u.conj().T
        elif kind == 1:
            sigma = (u := haar_unitary(4, rng)) @ rho @ u.conj().T
        else:
            tau = rng.uniform(0.0, 20.0) / g
            if kind == 2:
                u = setup.unitary(tau)
                omega = fixed_point_catalyst(rho, u, setup.d_c, tau=tau).omega
                full = u @ np.kron(rho, omega) @ u.conj().T
                sigma = partial_trace(full, [4, setup.d_c], [0])
            else:
                sigma = catalytic_protocol(rho, tau, setup).sigma_ab
        residual = exchange_identity_residual(rho, sigma, system, beta_a, beta_b)
        slack = clausius_bound_check(exchange_ledger(rho, sigma, system), beta_a, beta_b).slack
        yield residual, slack


def check_exchange(rng, trials: int = 1000) -> list[PropertyResult]:
    pairs = np.array(list(exchange_trials(rng, trials)))
    return [
        _result("exchange_identity", trials, pairs[:, 0], 1e-9),
        _result("clausius_inequality", trials, np.maximum(0.0, -pairs[:, 1]), 1e-9),
    ]


def check_orderings(config: SweepConfig) -> list[PropertyResult]:
    """Sweep-level orderings and catalysis contracts on a small grid."""
    records = sweep_lambda_theta(replace(config, with_bound=True))
    n = len(records)
    failed = [r for r in records if r.error]
    inf = float("inf")
    col = lambda f: [inf if r.error else f(r) for r in records]  # noqa: E731
    out = [
        _result("sweep_points_ok", n, [float(len(failed))], 0.0),
        _result("bound_below_catalytic", n, col(lambda r: max(0.0, r.bound - r.dE_cat)), FEASIBILITY_TOL),
        _result("catalytic_below_optimal", n, col(lambda r: max(0.0, r.dE_cat - r.dE_star)), FEASIBILITY_TOL),
        _result("arbitrary_below_optimal", n, col(lambda r: max(0.0, r.arbitrary_optimum - r.dE_star)), FEASIBILITY_TOL),
        _result(
            "bound_feasibility",
            n,
            col(lambda r: max(abs(r.bound_energy_residual), max(0.0, -r.bound_entropy_residual))),
            FEASIBILITY_TOL,
        ),
        _result("catalyst_restoration", n, col(lambda r: r.catalyst_residual), 1e-9),
        _result("energy_conservation", n, col(lambda r: r.energy_residual), 1e-9 * config.epsilon),
        _result("protocol_identity", n, col(lambda r: r.identity_residual), 1e-9),
        _result("protocol_clausius", n, col(lambda r: max(0.0, -r.clausius_slack)), 1e-9),
    ]
    setup = config.setup()
    lim = []
    for lam, th in config.admissible_points():
        rho = rho_lambda_theta(CorrelatedStateParams(lam, th, config.beta_a, config.beta_b, config.epsilon))
        r = catalytic_protocol(rho, 1e-10 * config.time_unit, setup)
        lim.append(abs(r.dE_a - r.dE_star))
    out.append(_result("zero_time_limit", len(lim), lim, 1e-8 * config.epsilon))
    return out


def run_suite(
    rng,
    config: SweepConfig,
    trials: int = 1000,
    dephasing_trials: int = 500,
    optimality_states: int = 50,
    optimality_samples: int = 2000,
    fault: str | None = None,
) -> list[PropertyResult]:
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; choose from {FAULTS}")
    results = [check_toy()]
    results.append(check_dephasing_invariance(rng, dephasing_trials, fault))
    results.append(check_energy_preserving_optimality(rng, optimality_states, optimality_samples))
    results.extend(check_exchange(rng, trials))
    results.extend(check_orderings(config))
    return results
