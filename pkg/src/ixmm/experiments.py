"""Experiment orchestration shared by the CLI and the acceptance suite.

Solves one (scenario, client offset, fee) cell at a time, extracts every
diagnostic and simulation summary the reports need, then releases the full
surface so memory stays bounded even for the largest liquidity grids.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .benchmark import BenchmarkConfig, BenchmarkDiagnostics, naive_policy
from .config import ExperimentConfig
from .params import InternalOrderParams, ScenarioName, scenario_preset
from .policy import depth_planes, stationary_policy
from .simulator import StationaryStrategy, SummaryStats, SurfaceStrategy, run_monte_carlo, sweep
from .solver import ExecutionRegion, SolverGrid, ValueSurface, obstacle_gap, qvi_residual, solve

__all__ = [
    "CellResult",
    "solve_scenario",
    "reference_surface",
    "run_cell",
    "boundary_sweep",
    "write_csv",
    "cmd_solve",
    "cmd_figures",
    "cmd_tables",
    "cmd_sweep",
]


def _grid_for(cfg: ExperimentConfig, internal: InternalOrderParams) -> SolverGrid:
    return SolverGrid.for_model(
        cfg.market, internal, dt=cfg.solver.dt, q_min=cfg.solver.q_min, q_max=cfg.solver.q_max
    )


def solve_scenario(
    cfg: ExperimentConfig, scenario: ScenarioName, rho: float, fee: float = 0.0
) -> tuple[ValueSurface, ExecutionRegion]:
    internal = scenario_preset(scenario, rho_tilde=rho, xi=fee)
    return solve(cfg.market, internal, _grid_for(cfg, internal))


def reference_surface(cfg: ExperimentConfig) -> ValueSurface:
    """Disabled-internal solve shared by the benchmark and the no-internal runs."""
    internal = InternalOrderParams.disabled()
    surface, _ = solve(cfg.market, internal, _grid_for(cfg, internal))
    return surface


@dataclass
class CellResult:
    """Everything kept from one (scenario, rho, fee) solve + simulation cell."""

    scenario: ScenarioName
    rho: float
    fee: float
    residual: float
    terminal_err: float
    obstacle_gap: float
    h0: float  # value at (t=0, q0, l0)
    region0: np.ndarray  # (n_q, n_l) execute mask at t=0
    boundaries: dict[int, int | None]  # l -> largest q in the region at t=0
    depths0_bid: np.ndarray  # (n_q, n_l, K) at t=0
    depths0_ask: np.ndarray
    q_min: int
    q_max: int
    optimal: SummaryStats | None = None
    naive: SummaryStats | None = None
    time_dependent: SummaryStats | None = None
    naive_diag: BenchmarkDiagnostics | None = None


def run_cell(
    cfg: ExperimentConfig,
    scenario: ScenarioName,
    rho: float,
    fee: float = 0.0,
    ref: ValueSurface | None = None,
    with_sims: bool = True,
    with_time_dependent: bool = True,
    threads: int = 1,
) -> CellResult:
    internal = scenario_preset(scenario, rho_tilde=rho, xi=fee)
    grid = _grid_for(cfg, internal)
    surface, region = solve(cfg.market, internal, grid)

    qs = np.arange(grid.q_min, grid.q_max + 1)
    terminal_err = float(np.abs(surface.h[-1] + (cfg.market.alpha * (qs * qs))[:, None]).max())
    bid0, ask0 = depth_planes(surface, 0)
    q0 = cfg.sim.q0
    l0 = internal.lbar if cfg.sim.l0 is None else cfg.sim.l0

    cell = CellResult(
        scenario=scenario,
        rho=rho,
        fee=fee,
        residual=qvi_residual(surface),
        terminal_err=terminal_err,
        obstacle_gap=obstacle_gap(surface),
        h0=surface.value(0, q0, l0),
        region0=surface.region[0].copy(),
        boundaries={l: region.boundary(0, l) for l in range(1, grid.n_l)},
        depths0_bid=bid0,
        depths0_ask=ask0,
        q_min=grid.q_min,
        q_max=grid.q_max,
    )

    if with_sims:
        opt_strategy = StationaryStrategy(stationary_policy(surface))
        cell.optimal = run_monte_carlo(opt_strategy, cfg.market, internal, cfg.sim, threads)
        if ref is None:
            ref = reference_surface(cfg)
        diag = BenchmarkDiagnostics()
        nv = naive_policy(
            BenchmarkConfig(iota=cfg.margin, rho_tilde=rho, reference=ref),
            lbar=internal.lbar,
            diag=diag,
        )
        cell.naive = run_monte_carlo(StationaryStrategy(nv), cfg.market, internal, cfg.sim, threads)
        cell.naive_diag = diag
        if with_time_dependent:
            cell.time_dependent = run_monte_carlo(
                SurfaceStrategy(surface), cfg.market, internal, cfg.sim, threads
            )
    return cell


def boundary_sweep(
    cfg: ExperimentConfig, scenario: ScenarioName, rho_grid=None
) -> list[tuple[float, int | None]]:
    """Largest execute-region q at t=0 (l=1) for each client offset."""
    out = []
    for rho in cfg.boundary_rho_grid if rho_grid is None else rho_grid:
        _, region = solve_scenario(cfg, scenario, rho)
        out.append((rho, region.boundary(0, 1)))
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if np.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def write_csv(path: str | Path, header_comment: str, columns: list[str], rows: list) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(f"# {header_comment}\n")
        w = csv.writer(f)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _rho_dir(rho: float) -> str:
    return f"rho_{rho:+.3f}"


# ---------------------------------------------------------------- commands


def cmd_solve(cfg: ExperimentConfig, out_dir: str | Path | None = None, threads: int = 1) -> list[Path]:
    """Solve every scenario x offset in the config and dump the surfaces to disk."""
    out = Path(out_dir or cfg.out_dir)
    h = cfg.config_hash()
    written = []
    for scenario in cfg.scenarios:
        for rho in cfg.rho_grid:
            surface, _ = solve_scenario(cfg, scenario, rho, fee=cfg.fee)
            d = out / "solve" / scenario.value / _rho_dir(rho) / h
            surface.save(d)
            meta = d / "meta.json"
            merged = json.loads(meta.read_text())
            merged.update(
                {
                    "config_hash": h,
                    "scenario": scenario.value,
                    "rho_tilde": rho,
                    "fee": cfg.fee,
                    "residual": qvi_residual(surface),
                    "terminal_err": float(
                        np.abs(
                            surface.h[-1]
                            + (cfg.market.alpha * np.arange(cfg.solver.q_min, cfg.solver.q_max + 1) ** 2)[:, None]
                        ).max()
                    ),
                }
            )
            meta.write_text(json.dumps(merged, sort_keys=True, indent=2) + "\n")
            written.append(d)
    return written


def cmd_figures(cfg: ExperimentConfig, out_dir: str | Path | None = None, threads: int = 1) -> list[Path]:
    """Depth-ladder and execution-boundary datasets behind the report figures."""
    out = Path(out_dir or cfg.out_dir)
    h = cfg.config_hash()
    ref = reference_surface(cfg)
    ref_bid, ref_ask = depth_planes(ref, 0)
    written = []
    header = f"config_hash={h} units=price-units depths at t=0"
    for scenario in cfg.scenarios:
        for rho in cfg.rho_grid:
            cell = run_cell(cfg, scenario, rho, ref=ref, with_sims=False)
            l_slices = [0, 1]
            if scenario is ScenarioName.FULL_AMOUNT:
                l_slices.append(cell.region0.shape[1] - 1)
            rows = []
            for qi in range(cell.depths0_bid.shape[0]):
                q = qi + cell.q_min
                for k, z in enumerate(cfg.market.sizes):
                    for l in l_slices:
                        rows.append(
                            (
                                "surface", q, l, z,
                                _nan_none(cell.depths0_bid[qi, l, k]),
                                _nan_none(cell.depths0_ask[qi, l, k]),
                                int(cell.region0[qi, l]),
                            )
                        )
                    rows.append(
                        (
                            "reference", q, 0, z,
                            _nan_none(ref_bid[qi, 0, k]),
                            _nan_none(ref_ask[qi, 0, k]),
                            0,
                        )
                    )
            path = out / "figures" / scenario.value / _rho_dir(rho) / f"{h}.csv"
            written.append(
                write_csv(path, header, ["variant", "q", "l", "size", "bid_depth", "ask_depth", "execute"], rows)
            )
        if scenario in (ScenarioName.ICEBERG, ScenarioName.TWAP):
            bounds = boundary_sweep(cfg, scenario)
            path = out / "figures" / scenario.value / "boundary" / f"{h}.csv"
            written.append(
                write_csv(
                    path,
                    f"config_hash={h} largest execute-region q at t=0, l=1, vs client offset",
                    ["rho_tilde", "boundary_q"],
                    bounds,
                )
            )
    return written


def _nan_none(v: float):
    return None if np.isnan(v) else float(v)


def run_table_cells(cfg: ExperimentConfig, threads: int = 1, with_time_dependent: bool = True) -> dict:
    """All scenario x offset cells with both strategies simulated."""
    ref = reference_surface(cfg)
    cells = {}
    for scenario in cfg.scenarios:
        for rho in cfg.rho_grid:
            cells[(scenario, rho)] = run_cell(
                cfg, scenario, rho, fee=cfg.fee, ref=ref,
                with_time_dependent=with_time_dependent, threads=threads,
            )
    return cells


def cmd_tables(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    threads: int = 1,
    cells: dict | None = None,
) -> list[Path]:
    """P&L and first-fill-time comparison tables over scenarios x offsets x strategies."""
    out = Path(out_dir or cfg.out_dir)
    h = cfg.config_hash()
    if cells is None:
        cells = run_table_cells(cfg, threads=threads, with_time_dependent=False)
    scale = cfg.sim.report_scale
    rhos = list(cfg.rho_grid)

    pnl_cols = ["scenario", "strategy"]
    ff_cols = ["scenario", "strategy"]
    for rho in rhos:
        tag = f"rho_{rho:+.2f}"
        pnl_cols += [f"pnl_mean_{tag}", f"pnl_std_{tag}"]
        ff_cols += [
            f"ff_mean_{tag}", f"ff_std_{tag}", f"fill_fraction_{tag}",
            f"ff_censored_mean_{tag}", f"ff_censored_std_{tag}",
        ]
    pnl_cols.append("valid")
    ff_cols.append("valid")

    pnl_rows, ff_rows = [], []
    for scenario in cfg.scenarios:
        for strat in ("optimal", "naive"):
            prow = [scenario.value, strat]
            frow = [scenario.value, strat]
            valid = True
            for rho in rhos:
                s: SummaryStats = getattr(cells[(scenario, rho)], strat)
                prow += [s.pnl_mean * scale, s.pnl_std * scale]
                frow += [
                    s.first_fill_mean, s.first_fill_std, s.fill_fraction,
                    s.first_fill_censored_mean, s.first_fill_censored_std,
                ]
                valid = valid and s.valid
            prow.append(int(valid))
            frow.append(int(valid))
            pnl_rows.append(prow)
            ff_rows.append(frow)

    header = (
        f"config_hash={h} pnl in price-units*report_scale (report_scale={scale}), "
        f"fill times in seconds, n_paths={cfg.sim.n_paths}, seed={cfg.sim.seed}"
    )
    p1 = write_csv(out / "tables" / f"pnl_{h}.csv", header, pnl_cols, pnl_rows)
    p2 = write_csv(out / "tables" / f"fill_times_{h}.csv", header, ff_cols, ff_rows)
    return [p1, p2]


def cmd_sweep(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    threads: int = 1,
    scenario: ScenarioName = ScenarioName.ICEBERG,
    rho: float = 0.0,
) -> list[Path]:
    """Fee and margin sweeps of mean P&L and internal volume for the comparison figure."""
    out = Path(out_dir or cfg.out_dir)
    h = cfg.config_hash()
    internal = scenario_preset(scenario, rho_tilde=rho, xi=0.0)
    scale = cfg.sim.report_scale
    written = []
    common = dict(
        solver_dt=cfg.solver.dt, q_min=cfg.solver.q_min, q_max=cfg.solver.q_max, threads=threads
    )
    fee_rows = sweep(cfg.market, internal, cfg.sim, "fee", list(cfg.fee_grid), **common)
    rows = [
        (
            r["value"], r["optimal_pnl"] * scale, r["optimal_volume"],
            r["naive_pnl"] * scale, r["naive_volume"], r["as_pnl"] * scale,
        )
        for r in fee_rows
    ]
    header = (
        f"config_hash={h} scenario={scenario.value} rho_tilde={rho} pnl scaled by "
        f"report_scale={scale}, volume in units/second, n_paths={cfg.sim.n_paths}, seed={cfg.sim.seed}"
    )
    written.append(
        write_csv(
            out / "sweep" / scenario.value / "fee" / f"{h}.csv",
            header,
            ["fee", "optimal_pnl", "optimal_volume", "naive_pnl", "naive_volume", "as_pnl"],
            rows,
        )
    )
    margin_rows = sweep(cfg.market, internal, cfg.sim, "margin", list(cfg.margin_grid), **common)
    rows = [
        (r["value"], r["naive_pnl"] * scale, r["naive_volume"], r["as_pnl"] * scale)
        for r in margin_rows
    ]
    written.append(
        write_csv(
            out / "sweep" / scenario.value / "margin" / f"{h}.csv",
            header,
            ["margin", "naive_pnl", "naive_volume", "as_pnl"],
            rows,
        )
    )
    return written
