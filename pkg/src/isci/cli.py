"""Command-line interface: ``isci [--config PATH] [--set section.key=value] COMMAND``.

Failures print one line ``error: <code>: <message>`` on stderr and exit
nonzero (1 failed check, 2 config, 3 I/O, 4 computation).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .channel_sim import sample_covariance
from .channel_stats import build_second_order
from .checks import run_checks
from .config import ConfigError, build_plan, load_config
from .experiments import SweepError, degradation_table, run_snr_sweep, run_spread_sweep
from .grid import GridConfig, PrototypePair
from .output import emit_csv
from .svg import emit_svg

log = logging.getLogger("isci")

EXIT_CHECK, EXIT_CONFIG, EXIT_IO, EXIT_COMPUTE = 1, 2, 3, 4

FIGURES = {
    "snr_db": ("fig1_capacity", "fig1_sensing", "fig3_degradation"),
    "delta_D": ("fig2_capacity", "fig2_sensing", "fig4_degradation"),
}


class CheckFailed(RuntimeError):
    pass


def _parser():
    p = argparse.ArgumentParser(prog="isci", description="ISCI-aware channel estimation and capacity sweeps.")
    p.add_argument("--config", "-c", help="TOML config file (default: the shipped configuration)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config field (TOML value syntax); repeatable")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--verbose", "-v", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("stats", help="build and cache the channel second-order statistics")
    sub.add_parser("snr-sweep", help="sweep the symbol SNR at the configured spread factor")
    sub.add_parser("spread-sweep", help="sweep the spread factor at the configured SNRs")
    v = sub.add_parser("verify", help="run the deterministic identity and ordering checks")
    v.add_argument("--data-draws", type=int, default=50)
    o = sub.add_parser("oracle", help="compare quadrature C_h with a Monte-Carlo sample covariance")
    o.add_argument("--grid", default="3x2", help="MxN grid for the comparison (default 3x2)")
    o.add_argument("--draws", type=int, default=200_000)
    o.add_argument("--tol", type=float, default=0.05, help="relative Frobenius tolerance")
    return p


def _output_dir(args, cfg):
    return Path(args.out or cfg["output"]["dir"])


def cmd_stats(args, cfg):
    plan = build_plan(cfg, "snr_db")
    t0 = time.perf_counter()
    stats = build_second_order(plan.grid, plan.pair(), plan.scattering(plan.delta_D), plan.quad)
    summary = dict(delta_D=plan.delta_D, spread_ratio=plan.spread_ratio, MN=stats.MN, key=stats.key,
                   **stats.trace_summary(), seconds=round(time.perf_counter() - t0, 3))
    for k, v in summary.items():
        print(f"{k}={v}")
    return 0


def _write_outputs(result, figures, out_dir, formats):
    cap, sens, deg = figures
    written = []
    if "csv" in formats:
        written.append(emit_csv(result, out_dir / f"{cap}.csv", where={"knowledge": "partial"}))
        written.append(emit_csv(result, out_dir / f"{sens}.csv"))
        written.append(emit_csv(degradation_table(result), out_dir / f"{deg}.csv"))
    if "svg" in formats:
        written.append(emit_svg(result, "capacity", out_dir / f"{cap}.svg"))
        written.append(emit_svg(result, "sensing", out_dir / f"{sens}.svg"))
        written.append(emit_svg(result, "degradation", out_dir / f"{deg}.svg"))
    return written


def _sweep(args, cfg, axis):
    plan = build_plan(cfg, axis)
    log.info("running %s sweep over %d points", axis, len(plan.values))
    result = run_snr_sweep(plan) if axis == "snr_db" else run_spread_sweep(plan)
    for path in _write_outputs(result, FIGURES[axis], _output_dir(args, cfg), cfg["output"]["formats"]):
        print(f"wrote {path}")
    return 0


def cmd_verify(args, cfg):
    results = run_checks(build_plan(cfg, "snr_db"), data_draws=args.data_draws)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise CheckFailed(f"{len(failed)} of {len(results)} checks failed: {', '.join(failed)}")
    return 0


def cmd_oracle(args, cfg):
    try:
        M, N = (int(v) for v in args.grid.lower().split("x"))
        grid = GridConfig(M=M, N=N, T=cfg["grid"]["T"], F=cfg["grid"]["F"])
    except ValueError as exc:
        raise ConfigError("--grid", f"expected MxN with positive integers, got {args.grid!r}") from exc
    plan = build_plan(cfg, "snr_db")
    pair = PrototypePair.for_grid(grid, plan.pulse)
    scattering = replace(plan, grid=grid).scattering(plan.delta_D)
    t0 = time.perf_counter()
    C_h = build_second_order(grid, pair, scattering, plan.quad).C_h
    C_mc = sample_covariance(grid, pair, scattering, args.draws, plan.path_count, plan.seed)
    err = float(np.linalg.norm(C_mc - C_h) / np.linalg.norm(C_h))
    passed = err <= args.tol
    print(json.dumps(dict(grid=f"{M}x{N}", delta_D=plan.delta_D, draws=args.draws, rel_frobenius=err,
                          tol=args.tol, passed=passed, seconds=round(time.perf_counter() - t0, 1))))
    if not passed:
        raise CheckFailed(f"oracle deviation {err:.4f} exceeds {args.tol}")
    return 0


COMMANDS = {
    "stats": cmd_stats,
    "snr-sweep": lambda a, c: _sweep(a, c, "snr_db"),
    "spread-sweep": lambda a, c: _sweep(a, c, "delta_D"),
    "verify": cmd_verify,
    "oracle": cmd_oracle,
}


def _fail(code, message, status):
    print(f"error: {code}: {' '.join(str(message).split())}", file=sys.stderr)
    return status


def run(command, config_path=None, overrides=(), argv_rest=()):
    """Programmatic entry point mirroring the command line."""
    argv = []
    if config_path is not None:
        argv += ["--config", str(config_path)]
    for o in overrides:
        argv += ["--set", o]
    return main(argv + [command, *argv_rest])


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.overrides)
        return COMMANDS[args.command](args, cfg)
    except FileNotFoundError as exc:
        return _fail("io", exc, EXIT_IO)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except CheckFailed as exc:
        return _fail("check", exc, EXIT_CHECK)
    except OSError as exc:
        return _fail("io", exc, EXIT_IO)
    except (SweepError, ValueError, FloatingPointError, np.linalg.LinAlgError, RuntimeError) as exc:
        return _fail("compute", exc, EXIT_COMPUTE)


if __name__ == "__main__":
    sys.exit(main())
