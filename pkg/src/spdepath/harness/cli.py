"""Command line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
3 I/O error.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from .. import binio
from ..core import Purpose, StreamKey
from ..fem import solve_fem
from ..noise import sample_increments
from ..spectral import build_coupling_table, solve_spectral
from .config import ConfigError, ExperimentConfig, load_config
from .convergence import NumericalFailure, run_convergence
from .defects import defect_study
from .localization import ConsistencyError, run_localization

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


def _common(parser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="experiment config file")
    parser.add_argument("--seed", type=int, default=default, help="master seed (u64)")
    parser.add_argument("--out", default=default, help="output directory")
    parser.add_argument("--paths", type=int, default=default, help="number of sample paths")
    parser.add_argument("--workers", type=int, default=default, help="worker processes")
    parser.add_argument("--quiet", action="store_true",
                        default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spdepath", description="Pathwise space approximations of SPDEs")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="one trajectory, dumped in binary form")
    _common(sim, suppress=True)
    sim.add_argument("--level", type=int, help="level (default: finest configured)")
    sim.add_argument("--path", type=int, default=0, help="path index")

    conv = sub.add_parser("converge", help="coupled-path convergence study")
    _common(conv, suppress=True)

    dfc = sub.add_parser("defect", help="resolvent / elliptic defect table")
    _common(dfc, suppress=True)

    co = sub.add_parser("coeffs", help="print the multiplicative coupling table")
    _common(co, suppress=True)
    co.add_argument("--level", type=int, required=True, help="truncation level n")

    loc = sub.add_parser("localize", help="cutoff agreement experiment")
    _common(loc, suppress=True)
    loc.add_argument("--cutoffs", help="comma separated cutoff radii")
    return parser


def _config(args) -> ExperimentConfig:
    if args.config is None:
        raise UsageError("--config is required for this command")
    config = load_config(args.config)
    return config.with_overrides(seed=args.seed, paths=args.paths, workers=args.workers)


def _emit(args, text: str):
    if not args.quiet:
        sys.stdout.write(text)


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    config = _config(args)
    level = args.level or config.levels[-1]
    run = config.run_for(level)
    table = None
    if run.noise_modes:
        key = StreamKey(config.seed, args.path, Purpose.NOISE)
        table = sample_increments(config.noise_basis(), config.time_grid(), key,
                                  modes=run.noise_modes, mode=config.noise_mode)
    solve = solve_spectral if config.scheme == "spectral" else solve_fem
    traj = solve(run, table=table)
    out = _out_dir(args)
    if out is not None:
        binio.dump_trajectory(out / "trajectory.bin", traj)
        if table is not None:
            binio.dump_increments(out / "increments.bin", table)
    _emit(args, f"{config.scheme} level {level}, path {args.path}: {traj.shape[0]} times x "
                f"{traj.shape[1]} unknowns, final max |u| = {abs(traj[-1]).max():.6g}\n")
    return EXIT_OK


def cmd_converge(args) -> int:
    config = _config(args)
    report = run_convergence(config)
    out = _out_dir(args)
    if out is not None:
        report.write(out)
    _emit(args, report.summary())
    return EXIT_OK


def cmd_defect(args) -> int:
    config = _config(args)
    table = defect_study(config)
    out = _out_dir(args)
    if out is not None:
        (out / "defects.csv").write_text(table.csv_text())
    _emit(args, table.summary())
    return EXIT_OK


def cmd_coeffs(args) -> int:
    if args.level < 1:
        raise UsageError("--level must be >= 1")
    lines = [f"{k} {ell} {src} {coeff:+.17g}"
             for k, ell, src, coeff in build_coupling_table(args.level).rows()]
    text = "\n".join(lines) + "\n"
    out = _out_dir(args)
    if out is not None:
        (out / "coeffs.txt").write_text(text)
    _emit(args, text)
    return EXIT_OK


def cmd_localize(args) -> int:
    config = _config(args)
    cutoffs = None
    if args.cutoffs:
        try:
            cutoffs = [float(v) for v in args.cutoffs.split(",")]
        except ValueError:
            raise UsageError(f"bad --cutoffs {args.cutoffs!r}") from None
    report = run_localization(config, cutoffs)
    out = _out_dir(args)
    if out is not None:
        (out / "localization.csv").write_text(report.csv_text())
        (out / "localization.txt").write_text(report.summary())
    _emit(args, report.summary())
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "converge": cmd_converge, "defect": cmd_defect,
            "coeffs": cmd_coeffs, "localize": cmd_localize}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings():
            if args.quiet:
                warnings.simplefilter("ignore")
            return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"spdepath: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"spdepath: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"spdepath: invalid config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, ConsistencyError, FloatingPointError) as exc:
        print(f"spdepath: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
