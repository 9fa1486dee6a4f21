"""Command-line entry point: solve surfaces, export figure/table/sweep datasets.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 a simulation run was flagged invalid (inventory clamped at the grid edge).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import default_config, load_config
from .errors import ConfigError, InvalidRunError, NumericalError
from .experiments import cmd_figures, cmd_solve, cmd_sweep, cmd_tables, run_table_cells


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ixmm",
        description="Quote-ladder optimization against an internal client-order venue",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "solve value surfaces and dump them with metadata"),
        ("figures", "export depth-ladder and execution-boundary datasets"),
        ("tables", "run strategy comparisons and export P&L / fill-time tables"),
        ("sweep", "export the fee/margin sweep dataset"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, default=None, help="YAML config path (defaults built in)")
        p.add_argument("--out", type=str, default=None, help="output directory (default from config)")
        p.add_argument("--seed", type=int, default=None, help="override the simulation seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo chunks")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config()
        if args.seed is not None:
            cfg = replace(cfg, sim=replace(cfg.sim, seed=args.seed))
        if args.out is not None:
            cfg = replace(cfg, out_dir=args.out)

        if args.command == "solve":
            written = cmd_solve(cfg, threads=args.threads)
        elif args.command == "figures":
            written = cmd_figures(cfg, threads=args.threads)
        elif args.command == "tables":
            cells = run_table_cells(cfg, threads=args.threads, with_time_dependent=False)
            written = cmd_tables(cfg, threads=args.threads, cells=cells)
            bad = [
                (s.value, rho)
                for (s, rho), cell in cells.items()
                if not (cell.optimal.valid and cell.naive.valid)
            ]
            if bad:
                raise InvalidRunError(f"inventory clamps occurred in cells: {bad}")
        else:
            written = cmd_sweep(cfg, threads=args.threads)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    except InvalidRunError as e:
        print(f"invalid run: {e}", file=sys.stderr)
        return 4

    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
