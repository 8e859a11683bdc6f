"""Command-line front end: ``lacuna <command> [--config PATH] [--out DIR] ...``.

Exit codes: 0 all tolerances pass, 1 a tolerance failed, 2 the config (or
invocation) is invalid and nothing was written, 3 a numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import EXPERIMENTS, build_directions, config_directions, grid_from_config, random_test_function
from .geometry import GeometryError, cell_indices, lacunarity_order
from .harness import ConfigError, ExperimentConfig, ExperimentReport, NumericalError
from .operators import OperatorError, OperatorSpec
from .spectral import GridError, GridFunction, load_grid_function, norm, save_grid_function
from .weights import WeightError

COMMANDS = ("dissect", "gen-directions", "verify-covering", "verify-ie", "apply", "sweep-norms",
            "kernel-decay", "pointwise", "cww", "almost-ortho", "maximal-avg", "a2")

EXIT_OK, EXIT_TOLERANCE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("lacuna")


class UsageError(Exception):
    """Invalid invocation (e.g. output directory would be overwritten)."""


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lacuna", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"lacuna {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="JSON config (default: the shipped config for the command)")
    p.add_argument("--out", type=Path, default=None, help="output directory (default: ./lacuna-out/<command>)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for independent trials")
    p.add_argument("--force", action="store_true", help="allow writing into a non-empty output directory")
    return p


def _configure_logging() -> None:
    level = os.environ.get("LACUNA_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def load_config(command: str, path: Path | None, seed: int | None) -> ExperimentConfig:
    config = ExperimentConfig.default(command) if path is None else ExperimentConfig.from_file(path)
    if config.experiment != command:
        raise ConfigError(f"config is for {config.experiment!r}, command is {command!r}")
    if seed is not None:
        config = config.with_seed(seed)
    return config


def _prepare_out(out: Path, force: bool) -> Path:
    if out.exists():
        if not out.is_dir():
            raise UsageError(f"{out} exists and is not a directory")
        if any(out.iterdir()) and not force:
            raise UsageError(f"{out} is not empty; pass --force to overwrite")
    return out


# --------------------------------------------------------------------------
# utility commands


def run_dissect(config: ExperimentConfig, threads: int) -> ExperimentReport:
    n = config.grid.get("n", 2)
    O = config_directions(config, n)
    rep = ExperimentReport("dissect", config, threads)
    for i, (v, cell) in enumerate(zip(O.vectors, cell_indices(O.vectors))):
        rep.add_row(index=i, direction=v, cell=cell)
    rep.summary = {"count": len(O), "distinct_cells": len({tuple(c) for c in cell_indices(O.vectors)})}
    return rep


def gen_directions(config: ExperimentConfig, out: Path) -> tuple[str, int]:
    n = config.grid.get("n", 2)
    O = config_directions(config, n)
    check = config.params.get("check_order")
    status = EXIT_OK
    found = None
    if check is not None:
        found = lacunarity_order(O, max_order=int(check))
        if found is None:
            status = EXIT_TOLERANCE
    out.mkdir(parents=True, exist_ok=True)
    (out / "directions.json").write_text(O.to_json() + "\n")
    line = f"gen-directions: {'PASS' if status == EXIT_OK else 'FAIL'} ({len(O)} directions, order {found})"
    return line, status


def apply_operator(config: ExperimentConfig, out: Path) -> tuple[str, int]:
    grid = grid_from_config(config)
    params = config.params
    try:
        op = OperatorSpec.from_dict(params["operator"])
    except KeyError:
        raise ConfigError("apply needs params.operator") from None
    src = params.get("input", "random")
    if src == "random":
        f = random_test_function(grid, np.random.default_rng(config.seed), band=params.get("band"))
    else:
        f = load_grid_function(src)
        if f.grid != grid:
            raise ConfigError(f"input grid {f.grid} does not match config grid {grid}")
    g = op.apply(f)
    if not np.all(np.isfinite(g.values)):
        raise NumericalError("operator output is not finite")
    dtype = params.get("dtype", "complex128")
    out.mkdir(parents=True, exist_ok=True)
    save_grid_function(f, out / "input.bin", dtype)
    save_grid_function(g, out / "output.bin", dtype)
    summary = {"operator": op.to_dict(), "input_norm": norm(f), "output_norm": norm(g)}
    (out / "apply.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return f"apply: PASS ({op.kind}, ||f||={norm(f):.6g}, ||Tf||={norm(g):.6g})", EXIT_OK


# --------------------------------------------------------------------------


def run(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    _configure_logging()
    try:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        config = load_config(args.command, args.config, args.seed)
        out = _prepare_out(args.out or Path("lacuna-out") / args.command, args.force)
        # resolve names before any output exists
        if "directions" in config.raw:
            build_directions(config.raw["directions"], config.grid.get("n", 2), config.seed)
        if config.grid:
            grid_from_config(config)
        if args.command == "gen-directions":
            line, status = gen_directions(config, out)
        elif args.command == "apply":
            line, status = apply_operator(config, out)
        else:
            func = run_dissect if args.command == "dissect" else EXPERIMENTS[args.command]
            report = func(config, args.threads)
            report.write(out)
            line, status = report.summary_line(), (EXIT_OK if report.passed else EXIT_TOLERANCE)
    except (ConfigError, UsageError, GeometryError, GridError, OperatorError, WeightError) as exc:
        print(f"lacuna: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError) as exc:
        print(f"lacuna: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(line)
    return status


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
