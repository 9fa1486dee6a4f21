#!/usr/bin/env python3
"""Fast tour: solve each client-algo scenario at mid placement, print the
execution thresholds and a small strategy comparison."""

import time

from ixmm import (
    InternalOrderParams,
    ScenarioName,
    SimConfig,
    SolverGrid,
    calibrated_market_params,
    scenario_preset,
    solve,
    run_monte_carlo,
)
from ixmm.benchmark import BenchmarkConfig, naive_policy
from ixmm.policy import stationary_policy
from ixmm.simulator import StationaryStrategy


def run():
    market = calibrated_market_params()
    sim = SimConfig(n_paths=1000, seed=7)

    ref_internal = InternalOrderParams.disabled()
    ref_surface, _ = solve(market, ref_internal, SolverGrid.for_model(market, ref_internal))

    print(f"{'scenario':14s} {'q* (l=1)':>9s} {'optimal pnl':>12s} {'naive pnl':>10s} "
          f"{'opt fill s':>11s} {'naive fill s':>13s}")
    for name in (ScenarioName.ICEBERG, ScenarioName.TWAP, ScenarioName.FULL_AMOUNT):
        t0 = time.time()
        internal = scenario_preset(name, rho_tilde=0.0, xi=0.0)
        surface, region = solve(market, internal, SolverGrid.for_model(market, internal))
        opt = run_monte_carlo(
            StationaryStrategy(stationary_policy(surface)), market, internal, sim
        )
        nv_pol = naive_policy(
            BenchmarkConfig(iota=0.1, rho_tilde=0.0, reference=ref_surface), lbar=internal.lbar
        )
        nv = run_monte_carlo(StationaryStrategy(nv_pol), market, internal, sim)
        print(
            f"{name.value:14s} {str(region.boundary(0, 1)):>9s} {opt.pnl_mean:12.3f} "
            f"{nv.pnl_mean:10.3f} {opt.first_fill_mean:11.2f} {nv.first_fill_mean:13.2f}"
            f"   ({time.time() - t0:.1f}s)"
        )


if __name__ == "__main__":
    run()
