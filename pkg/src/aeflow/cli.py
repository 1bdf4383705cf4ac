"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import platform
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bound import BoundConvergenceError
from .catalysis import FixedPointError
from .scenarios import SCENARIOS, ConfigError, RunConfig, Table, run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3
SCHEMA_VERSION = 1

# flag name -> RunConfig field
_FLAGS = {
    "scenario": "scenario",
    "lambda": "lam",
    "theta": "theta",
    "beta_a": "beta_a",
    "beta_b": "beta_b",
    "g": "g",
    "epsilon": "epsilon",
    "n_fock": "n_fock",
    "tau_max": "tau_max",
    "tau_points": "tau_points",
    "grid": "grid",
    "seed": "seed",
    "out": "out",
    "format": "format",
    "threads": "threads",
    "inject_fault": "inject_fault",
}


class _Parser(argparse.ArgumentParser):
    """Flag errors are configuration errors (exit 1), not argparse's 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: config error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="aeflow",
        description="Energy flow between correlated qubits: optimal, catalytic and bound values.",
    )
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--config", type=Path, help="JSON file with run settings; flags override it")
    p.add_argument("--lambda", type=float, help="singlet weight of the correlated state")
    p.add_argument("--theta", type=float, help="triplet weight of the correlated state")
    p.add_argument("--beta-a", type=float)
    p.add_argument("--beta-b", type=float)
    p.add_argument("--g", type=float, help="atom-cavity coupling")
    p.add_argument("--epsilon", type=float, help="qubit gap (energy unit)")
    p.add_argument("--n-fock", type=int, help="cavity Fock cutoff")
    p.add_argument("--tau-max", type=float, help="end of the interaction-time scan, in units of 1/g")
    p.add_argument("--tau-points", type=int, help="coarse scan points")
    p.add_argument("--grid", type=int, help="points per axis of the sweep grid")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path; '-' for standard output")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--threads", type=int, help="sweep worker processes")
    p.add_argument("--inject-fault", help=argparse.SUPPRESS)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args: argparse.Namespace) -> RunConfig:
    settings: dict = {}
    if args.config is not None:
        try:
            settings = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(settings, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(settings) - set(RunConfig.keys())
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for flag, key in _FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            settings[key] = value
    try:
        return RunConfig(**settings)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def render_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_cell(x) for x in row])
    return buf.getvalue()


def _json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, dict):
        return {k: _json_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_value(v) for v in x]
    return x


def render_json(table: Table) -> str:
    records = [dict(zip(table.columns, map(_json_value, row))) for row in table.rows]
    return json.dumps({"columns": list(table.columns), "rows": records}, indent=2) + "\n"


def _output_paths(cfg: RunConfig) -> tuple[Path | None, Path]:
    if cfg.out == "-":
        return None, Path(f"{cfg.scenario}.manifest.json")
    data = Path(cfg.out) if cfg.out else Path(f"{cfg.scenario}.{cfg.format}")
    return data, data.with_name(data.name + ".manifest.json")


def write_manifest(path: Path, cfg: RunConfig, table: Table | None, wall: float, status: int, error: str | None) -> None:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": _json_value(asdict(cfg)),
        "residuals": _json_value(table.residuals) if table is not None else {},
        "wall_time_seconds": wall,
        "exit_status": status,
        "error": error,
        "rng": {"generator": "numpy.random.Philox", "seed": cfg.seed},
        "versions": {
            "aeflow": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    path.write_text(json.dumps(manifest, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"aeflow: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    data_path, manifest_path = _output_paths(cfg)
    start = time.perf_counter()
    table, error, status = None, None, EXIT_OK
    try:
        table = run(cfg)
    except ConfigError as exc:
        print(f"aeflow: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FixedPointError, BoundConvergenceError, np.linalg.LinAlgError, FloatingPointError) as exc:
        error, status = f"{type(exc).__name__}: {exc}", EXIT_NUMERICAL
    wall = time.perf_counter() - start

    if table is not None:
        text = render_csv(table) if cfg.format == "csv" else render_json(table)
        if data_path is None:
            sys.stdout.write(text)
        else:
            data_path.parent.mkdir(parents=True, exist_ok=True)
            data_path.write_bytes(text.encode("utf-8"))
        if table.numerical_failure:
            error, status = table.numerical_failure, EXIT_NUMERICAL
        elif table.verify_failed:
            failed = [r[0] for r in table.rows if not r[-1]]
            error, status = f"properties failed: {', '.join(failed)}", EXIT_VERIFY
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    write_manifest(manifest_path, cfg, table, wall, status, error)
    if error:
        print(f"aeflow: {error}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
