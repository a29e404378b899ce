"""Command-line entry point: ``zakharov <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error or unknown preset, 2 failed assertion,
3 blow-up abort.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, ExperimentConfig
from .dynamics import BlowUpError
from .presets import PRESETS, UnknownPreset

EXIT_OK, EXIT_USAGE, EXIT_ASSERT, EXIT_BLOWUP = 0, 1, 2, 3

SUBCOMMANDS = ("simulate", "study-fixed-diff", "study-almost-cons", "study-growth", "study-local-time",
               "ground-state", "verify")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value config file")
    common.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
    common.add_argument("--preset", help=f"initial data: {', '.join(sorted(PRESETS))}")
    common.add_argument("--seed", type=int, help="random seed for presets")
    common.add_argument("--quiet", action="store_true", help="only report failures")
    parser = _Parser(prog="zakharov", description="2D Zakharov solver and I-method studies")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "verify":
            p.add_argument("--only", help="comma-separated criterion numbers (default: all)")
    return parser


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    if args.preset is not None:
        if args.preset not in PRESETS:
            raise UnknownPreset(f"unknown preset {args.preset!r}; choose from {', '.join(sorted(PRESETS))}")
        cfg = replace(cfg, preset=args.preset)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, output=str(args.out))
    if cfg.preset not in PRESETS:
        raise UnknownPreset(f"unknown preset {cfg.preset!r}")
    return cfg


def _say(args, text: str) -> None:
    if not args.quiet:
        print(text)


def _run(args) -> int:
    from . import studies

    if args.command == "verify":
        from .acceptance import run_all

        only = [int(x) for x in args.only.split(",")] if args.only else None
        results = run_all(only=only, out_dir=args.out)
        for r in results:
            if r.passed:
                _say(args, r.line())
            else:
                print(r.line())
        return EXIT_OK if all(r.passed for r in results) else EXIT_ASSERT

    if args.command == "ground-state":
        from .groundstate import ground_state, ode_residual

        out = args.out or Path(ExperimentConfig().output)
        out.mkdir(parents=True, exist_ok=True)
        prof = ground_state()
        prof.to_csv(out / "ground_state.csv")
        _say(args, f"Q(0) = {prof.q0:.10f}  ||Q||^2 = {prof.l2_norm_sq:.10f}  "
                   f"residual = {ode_residual(prof):.2e}  -> {out / 'ground_state.csv'}")
        return EXIT_OK

    cfg = _config(args)
    out = Path(cfg.output)
    if args.command == "simulate":
        traj = studies.run_simulation(cfg, out)
        first, last = traj.ledger[0], traj.ledger[-1]
        _say(args, f"t = {last.t:g}: mass {first.mass:.12g} -> {last.mass:.12g}, "
                   f"H {first.h_unv:.12g} -> {last.h_unv:.12g}  ({out / 'ledger.csv'})")
        return EXIT_OK
    runner = {
        "study-fixed-diff": studies.run_fixed_time_difference_study,
        "study-almost-cons": studies.run_almost_conservation_study,
        "study-growth": studies.run_growth_study,
        "study-local-time": studies.run_local_time_heuristic,
    }[args.command]
    result = runner(cfg, out_dir=out)
    _say(args, result.summary())
    return EXIT_OK if result.passed else EXIT_ASSERT


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "zakharov: error: a subcommand is required")
        logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(message)s")
        return _run(args)
    except (UsageError, UnknownPreset, ConfigError) as exc:
        msg = exc.args[0] if exc.args else str(exc)
        print(msg if isinstance(exc, UsageError) else f"{parser.format_usage()}zakharov: error: {msg}",
              file=sys.stderr)
        return EXIT_USAGE
    except BlowUpError as exc:
        print(f"blow-up abort: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except AssertionError as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except ValueError as exc:
        # threshold refusals and similar launch-time rejections
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_ASSERT


if __name__ == "__main__":
    sys.exit(main())
