from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from . import bundle
from .errors import BudgetExceededError, ConfigValidationError, DivergenceError, InvalidArgumentError
from .paths import default_config_path, runs_dir
from .scenario import metrics, run
from .stability import NORM_TOL, SWEEP_BUDGET, SWEEP_PARAMS, analyze, frequency_response, sweep_gain_region
from .utils.app_settings import ExperimentConfig, load_experiment_config

LOG = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _setup_logging(level: str | None) -> None:
    name = (level or os.environ.get("CACC_LOG_LEVEL") or "WARNING").strip().upper()
    lvl = logging.getLevelName(name)
    if not isinstance(lvl, int):
        lvl = logging.WARNING
    logging.basicConfig(level=lvl, format=LOG_FORMAT, stream=sys.stderr)


def parse_grid(items: Sequence[str], *, budget: int = SWEEP_BUDGET) -> dict[str, list[float]]:
    """
    'kp=0.05,0.1,0.2' -> список значений;
    'kv=0:3:31'       -> linspace(start, stop, num).

    Размер сетки проверяется до построения значений.
    """
    grid: dict[str, list[float]] = {}
    sizes: dict[str, int] = {}
    for item in items:
        name, sep, raw = item.partition("=")
        name = name.strip()
        if not sep or not name or not raw.strip():
            raise InvalidArgumentError(f"grid entry {item!r} is not NAME=VALUES")
        if name not in SWEEP_PARAMS:
            raise InvalidArgumentError(f"unknown sweep parameter {name!r}; expected one of {', '.join(SWEEP_PARAMS)}")
        if name in grid:
            raise InvalidArgumentError(f"sweep parameter {name!r} given twice")
        try:
            if ":" in raw:
                start, stop, num = raw.split(":")
                lo, hi, n = float(start), float(stop), int(num)
            else:
                parts = raw.split(",")
                n = len(parts)
        except ValueError:
            raise InvalidArgumentError(f"cannot parse grid values in {item!r}") from None
        if n < 1:
            raise InvalidArgumentError(f"grid for {name!r} must have at least one value, got {n}")
        sizes[name] = n
        points = math.prod(sizes.values())
        if points > budget:
            raise BudgetExceededError(points, budget, sizes)
        try:
            if ":" in raw:
                values = np.linspace(lo, hi, n).tolist()
            else:
                values = [float(x) for x in parts]
        except ValueError:
            raise InvalidArgumentError(f"cannot parse grid values in {item!r}") from None
        if name == "r":
            values = [int(round(v)) for v in values]
        grid[name] = values
    return grid


def _out_dir(args: argparse.Namespace) -> Path:
    return Path(args.out) if args.out else runs_dir() / args.command


def _overrides(args: argparse.Namespace) -> list[str]:
    out = list(args.set or [])
    if args.seed is not None:
        out.append(f"simulation.seed={args.seed}")
    for flag, key in (("omega_min", "analysis.omega_min"), ("omega_max", "analysis.omega_max"), ("omega_points", "analysis.omega_points")):
        value = getattr(args, flag, None)
        if value is not None:
            out.append(f"{key}={value!r}")
    return out


def _load(args: argparse.Namespace) -> tuple[ExperimentConfig, dict, list[str]]:
    overrides = _overrides(args)
    cfg, resolved = load_experiment_config(Path(args.config), overrides)
    LOG.info("config %s loaded (%d overrides)", args.config, len(overrides))
    return cfg, resolved, overrides


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg, resolved, overrides = _load(args)
    out = _out_dir(args)
    try:
        log = run(cfg.scenario)
    except DivergenceError as e:
        print(f"divergence: {e}", file=sys.stderr)
        bundle.write_manifest(
            out, command="simulate", config=resolved, overrides=overrides,
            extra={"divergence": {"step": e.step, "t": e.t, "vehicle": e.vehicle}},
        )
        return EXIT_DIVERGED

    m = metrics(log)
    bundle.write_trajectory(log, out)
    bundle.write_metrics(m, out)
    bundle.write_manifest(out, command="simulate", config=resolved, overrides=overrides, links=log.links, extra={"rows": log.n_rows})
    LOG.info("simulation bundle written to %s", out)
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg, resolved, overrides = _load(args)
    out = _out_dir(args)
    report = analyze(cfg.scenario.platoon_params(), cfg.analysis.omega_grid())
    bundle.write_stability_report(report, out)
    if args.docx:
        from .printing.stability_docx import save_stability_docx

        save_stability_docx(report, out)
    bundle.write_manifest(out, command="analyze", config=resolved, overrides=overrides, extra={"certified": report.certified})
    if not report.certified:
        print("not certified: " + ", ".join(report.failed), file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_freq(args: argparse.Namespace) -> int:
    cfg, resolved, overrides = _load(args)
    out = _out_dir(args)
    params = cfg.scenario.platoon_params()
    resp = frequency_response(params, cfg.analysis.omega_grid())
    bundle.write_freq_response(resp, out)
    bundle.write_manifest(out, command="freq", config=resolved, overrides=overrides)
    peak = float(resp.magnitudes.max())
    if peak > 1.0 / params.r + NORM_TOL:
        LOG.warning("sampled |H| reaches %.6g, above the 1/r bound %.6g", peak, 1.0 / params.r)
        return EXIT_FAILED
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg, resolved, overrides = _load(args)
    grid = parse_grid(args.grid)
    out = _out_dir(args)
    rows = sweep_gain_region(grid, cfg.scenario.platoon_params(), with_norm=args.with_norm, workers=args.workers)
    bundle.write_region(rows, list(grid), out)
    certified = sum(r.certified for r in rows)
    bundle.write_manifest(
        out, command="sweep", config=resolved, overrides=overrides,
        extra={"grid": grid, "points": len(rows), "certified": certified},
    )
    LOG.info("%d of %d grid points certified", certified, len(rows))
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "freq": cmd_freq,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=str(default_config_path()), help="experiment config (JSON)")
    common.add_argument("--out", default=None, help="output directory (default: <data dir>/runs/<command>)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config value; repeatable")
    common.add_argument("--seed", type=int, default=None, help="channel loss seed")
    common.add_argument("--log-level", default=None, help="DEBUG/INFO/WARNING/ERROR (default from CACC_LOG_LEVEL)")

    parser = argparse.ArgumentParser(prog="cacc", description="CACC multiple-predecessor platoon toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="run the delayed closed-loop scenario")

    p = sub.add_parser("analyze", parents=[common], help="check stability conditions and H-inf norms")
    p.add_argument("--docx", action="store_true", help="also write stability_report.docx")

    p = sub.add_parser("freq", parents=[common], help="tabulate |H_l(jw)| for plotting")
    p.add_argument("--omega-min", type=float, default=None)
    p.add_argument("--omega-max", type=float, default=None)
    p.add_argument("--omega-points", type=int, default=None)

    p = sub.add_parser("sweep", parents=[common], help="classify a grid of parameters")
    p.add_argument("--grid", action="append", required=True, metavar="NAME=V1,V2|START:STOP:NUM")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--with-norm", action="store_true", help="also evaluate H-inf norms per point")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.log_level)
    LOG.info("command %s started", args.command)
    try:
        code = COMMANDS[args.command](args)
    except (ConfigValidationError, InvalidArgumentError) as e:
        LOG.debug("invalid input", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        LOG.debug("i/o failure", exc_info=True)
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    LOG.info("command %s finished with exit code %d", args.command, code)
    return code
