"""Scenario runners: each turns a run configuration into a result table."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .bound import catalytic_bound
from .catalysis import (
    SWEEP_COLUMNS,
    SweepConfig,
    catalytic_protocol,
    optimize_tau,
    sweep_lambda_theta,
    toy_setup,
    toy_state,
)
from .entropic import clausius_bound_check, exchange_identity_residual, exchange_ledger
from .models import CorrelatedStateParams, marginal_inverse_temperatures, rho_lambda_theta, two_qubit_system
from .optimal import optimal_arbitrary_unitary, optimal_energy_preserving
from .sampling import make_rng
from .verify import FAULTS, run_suite

SCENARIOS = ("optimal", "catalytic", "sweep", "bound", "toy", "verify")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    scenario: str = "toy"
    epsilon: float = 1.0
    g: float = 0.1
    n_fock: int = 3
    beta_a: float = 2.0
    beta_b: float = 0.5
    lam: float = 0.5
    theta: float = 0.0
    grid: int = 25
    tau_min: float = 0.05
    tau_max: float = 20.0
    tau_points: int = 400
    refine_iters: int = 60
    seed: int = 0
    threads: int = 1
    out: str | None = None
    format: str = "csv"
    verify_grid: int = 5
    verify_trials: int = 1000
    tolerances: dict = field(default_factory=dict)
    """Per-property tolerance overrides for ``verify``."""
    inject_fault: str | None = None

    def __post_init__(self) -> None:
        self.validate()

    @classmethod
    def keys(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        for name in ("epsilon", "g", "beta_a", "beta_b", "lam", "theta", "tau_min", "tau_max"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ConfigError(f"{name} must be a finite number, got {v!r}")
        for name in ("n_fock", "grid", "tau_points", "refine_iters", "seed", "threads", "verify_grid", "verify_trials"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"{name} must be an integer, got {v!r}")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.g < 0:
            raise ConfigError("g must be non-negative")
        if self.n_fock < 2:
            raise ConfigError("n_fock must be at least 2")
        if self.beta_b < 0 or self.beta_a < self.beta_b:
            raise ConfigError("need beta_a >= beta_b >= 0")
        if self.grid < 1 or self.verify_grid < 1:
            raise ConfigError("grid sizes must be at least 1")
        if not (self.tau_max > self.tau_min > 0):
            raise ConfigError("need tau_max > tau_min > 0")
        if self.tau_points < 2:
            raise ConfigError("tau_points must be at least 2")
        if self.seed < 0:
            raise ConfigError("seed must be an unsigned integer")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if not isinstance(self.tolerances, dict) or not all(
            isinstance(v, (int, float)) and v >= 0 for v in self.tolerances.values()
        ):
            raise ConfigError("tolerances must map property names to non-negative numbers")
        if self.inject_fault is not None and self.inject_fault not in FAULTS:
            raise ConfigError(f"unknown fault {self.inject_fault!r}")
        if self.scenario in ("optimal", "catalytic", "bound"):
            self.state_params()

    def state_params(self) -> CorrelatedStateParams:
        try:
            return CorrelatedStateParams(self.lam, self.theta, self.beta_a, self.beta_b, self.epsilon)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def sweep_config(self, n: int | None = None) -> SweepConfig:
        n = self.grid if n is None else n
        axis = tuple(float(x) for x in np.linspace(0.0, 1.0, n)) if n > 1 else (0.0,)
        return SweepConfig(
            lambdas=axis,
            thetas=axis,
            tau_min=self.tau_min,
            tau_max=self.tau_max,
            tau_points=self.tau_points,
            refine_iters=self.refine_iters,
            beta_a=self.beta_a,
            beta_b=self.beta_b,
            epsilon=self.epsilon,
            g=self.g,
            n_fock=self.n_fock,
            workers=self.threads,
        )


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple]
    residuals: dict = field(default_factory=dict)
    numerical_failure: str | None = None
    verify_failed: bool = False


def _max(values) -> float:
    vals = [float(v) for v in values if v is not None and math.isfinite(float(v))]
    return max(vals) if vals else float("nan")


def run_toy(cfg: RunConfig) -> Table:
    setup = toy_setup(cfg.epsilon)
    res = catalytic_protocol(toy_state(), 0.0, setup)
    sys_ab = setup.system_ab
    s_a = np.real(np.diag(sys_ab.marginal(res.sigma_ab_step1, 0)))
    s_b = np.real(np.diag(sys_ab.marginal(res.sigma_ab_step1, 1)))
    cols = ("dE_a", "sigma_a_0", "sigma_a_1", "sigma_b_0", "sigma_b_1", "catalyst_residual", "energy_residual", "dE_star")
    row = (res.dE_a, *s_a, *s_b, res.catalyst_residual, res.energy_residual, res.dE_star)
    return Table(cols, [row], {"catalyst_residual": res.catalyst_residual, "energy_residual": res.energy_residual})


def run_optimal(cfg: RunConfig) -> Table:
    p = cfg.state_params()
    rho = rho_lambda_theta(p)
    system = two_qubit_system(cfg.epsilon)
    star = optimal_energy_preserving(rho, system)
    arb = optimal_arbitrary_unitary(rho, system)
    sigma = star.unitary @ rho @ star.unitary.conj().T
    # the marginals of the correlated state are thermal at shifted temperatures
    beta_a, beta_b = marginal_inverse_temperatures(rho, system)
    ident = exchange_identity_residual(rho, sigma, system, beta_a, beta_b)
    slack = clausius_bound_check(exchange_ledger(rho, sigma, system), beta_a, beta_b).slack
    cols = ("lambda", "theta", "dE_star", "dE_arbitrary", "identity_residual", "clausius_slack")
    return Table(cols, [(p.lam, p.theta, star.dE_a, arb.dE_a, ident, slack)], {"identity_residual": ident})


def run_catalytic(cfg: RunConfig) -> Table:
    p = cfg.state_params()
    sc = cfg.sweep_config(1)
    res = optimize_tau(rho_lambda_theta(p), sc)
    dim = res.catalyst.fixed_space_dim if res.catalyst is not None else 0
    cols = (
        "lambda", "theta", "dE_star", "dE_cat", "tau_star", "advantage",
        "catalyst_residual", "energy_residual", "fixed_space_dim",
    )
    row = (
        p.lam, p.theta, res.dE_star, res.dE_c, res.tau_star / sc.time_unit, res.dE_star - res.dE_c,
        res.catalyst_residual, res.energy_residual, dim,
    )
    return Table(cols, [row], {"catalyst_residual": res.catalyst_residual, "energy_residual": res.energy_residual})


def run_bound(cfg: RunConfig) -> Table:
    p = cfg.state_params()
    b = catalytic_bound(rho_lambda_theta(p), two_qubit_system(cfg.epsilon))
    cols = ("lambda", "theta", "bound", "alpha", "multiplier_lambda", "entropy_residual", "energy_residual", "entropy_binding")
    row = (p.lam, p.theta, b.dE_bound, b.alpha, b.lam, b.entropy_residual, b.energy_residual, int(b.entropy_binding))
    t = Table(cols, [row], {"entropy_residual": b.entropy_residual, "energy_residual": b.energy_residual})
    if not b.converged:
        t.numerical_failure = "bound root-finder did not converge"
    return t


def run_sweep(cfg: RunConfig) -> Table:
    records = sweep_lambda_theta(cfg.sweep_config())
    bad = [r for r in records if r.error]
    residuals = {
        "points": len(records),
        "failed_points": len(bad),
        "max_catalyst_residual": _max(r.catalyst_residual for r in records),
        "max_energy_residual": _max(r.energy_residual for r in records),
        "max_bound_energy_residual": _max(abs(r.bound_energy_residual) for r in records),
        "min_bound_entropy_residual": -_max(-r.bound_entropy_residual for r in records),
        "max_bound_minus_cat": _max(r.bound - r.dE_cat for r in records),
        "max_cat_minus_star": _max(r.dE_cat - r.dE_star for r in records),
        "max_identity_residual": _max(r.identity_residual for r in records),
        "min_clausius_slack": -_max(-r.clausius_slack for r in records),
    }
    t = Table(SWEEP_COLUMNS, [r.row() for r in records], residuals)
    if bad:
        t.numerical_failure = "; ".join(f"({r.lam:g}, {r.theta:g}): {r.error}" for r in bad[:5])
    return t


def run_verify(cfg: RunConfig) -> Table:
    results = run_suite(
        make_rng(cfg.seed),
        cfg.sweep_config(cfg.verify_grid),
        trials=cfg.verify_trials,
        fault=cfg.inject_fault,
    )
    results = [
        replace(r, tolerance=tol, passed=bool(math.isfinite(r.worst_residual) and r.worst_residual <= tol))
        for r in results
        if (tol := cfg.tolerances.get(r.name)) is not None
    ] + [r for r in results if r.name not in cfg.tolerances]
    cols = ("property", "trials", "worst_residual", "tolerance", "passed")
    rows = [(r.name, r.trials, r.worst_residual, r.tolerance, int(r.passed)) for r in results]
    t = Table(cols, rows, {r.name: r.worst_residual for r in results})
    t.verify_failed = not all(r.passed for r in results)
    return t


RUNNERS = {
    "toy": run_toy,
    "optimal": run_optimal,
    "catalytic": run_catalytic,
    "bound": run_bound,
    "sweep": run_sweep,
    "verify": run_verify,
}


def run(cfg: RunConfig) -> Table:
    return RUNNERS[cfg.scenario](cfg)
