import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ixmm.config import default_config
from ixmm.experiments import reference_surface, run_cell
from ixmm.params import (
    InternalOrderParams,
    MarketParams,
    ScenarioName,
    calibrated_market_params,
    scenario_preset,
)
from ixmm.solver import SolverGrid, solve


@pytest.fixture(scope="session")
def study_cfg():
    return default_config()


@pytest.fixture(scope="session")
def ref_surface(study_cfg):
    """Disabled-internal solve at full scale (symmetric intensities)."""
    return reference_surface(study_cfg)


@pytest.fixture(scope="session")
def table_cells(study_cfg, ref_surface):
    """All scenario x offset cells: solve diagnostics plus the three simulation
    runs (stationary optimal, naive, time-dependent optimal) at full scale."""
    cells = {}
    for scenario in study_cfg.scenarios:
        for rho in study_cfg.rho_grid:
            cells[(scenario, rho)] = run_cell(
                study_cfg, scenario, rho, ref=ref_surface, with_sims=True, with_time_dependent=True
            )
    return cells


@pytest.fixture(scope="session")
def small_market():
    """Single-size market small enough for brute-force cross-checks."""
    return MarketParams(
        sigma=0.5,
        sizes=(1,),
        lambda_bid={1: 0.3},
        lambda_ask={1: 0.25},
        kappa={1: 1.2},
        alpha=0.02,
        phi=0.01,
        psi=0.05,
        horizon=1.0,
    )


@pytest.fixture(scope="session")
def small_internal():
    return InternalOrderParams(lbar=1, nu=0.3, mu=0.4, p=0.6, rho_tilde=0.03, xi=0.01)


@pytest.fixture(scope="session")
def small_surface(small_market, small_internal):
    grid = SolverGrid.for_model(small_market, small_internal, dt=0.05, q_min=-2, q_max=2)
    surface, region = solve(small_market, small_internal, grid)
    return surface, region


@pytest.fixture(scope="session")
def twap_surface():
    market = calibrated_market_params()
    internal = scenario_preset(ScenarioName.TWAP, 0.0, 0.0)
    grid = SolverGrid.for_model(market, internal, dt=0.01)
    surface, region = solve(market, internal, grid)
    return surface, region


@pytest.fixture(scope="session")
def iceberg_surface():
    market = calibrated_market_params()
    internal = scenario_preset(ScenarioName.ICEBERG, 0.0, 0.0)
    grid = SolverGrid.for_model(market, internal, dt=0.01)
    surface, region = solve(market, internal, grid)
    return surface, region
