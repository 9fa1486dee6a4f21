"""Market making with an internal client-order venue.

Numerical solver for the dealer's optimal quote ladder and internal-order
execution policy, a naive VWAP-insertion benchmark, and an event-driven
Monte Carlo simulator for desk-scale experiments.
"""

from .benchmark import BenchmarkConfig, BenchmarkDiagnostics, as_depths, naive_decision, vwap_adjusted_ask
from .errors import ConfigError, InvalidRunError, NumericalError, StabilityError
from .params import (
    InternalOrderParams,
    MarketParams,
    ScenarioName,
    effective_offset,
    fill_intensity,
    calibrated_market_params,
    scenario_preset,
)
from .policy import QuoteLadder, StationaryPolicy, StrategyDecision, decide, stationary_policy
from .simulator import (
    SimConfig,
    SimState,
    SummaryStats,
    run_monte_carlo,
    simulate_path,
    step,
    sweep,
    write_path_records,
)
from .solver import (
    ExecutionRegion,
    SolverGrid,
    ValueSurface,
    continuation_rhs,
    intervention_value,
    optimal_depth,
    qvi_residual,
    solve,
)

__all__ = [
    "BenchmarkConfig",
    "BenchmarkDiagnostics",
    "ConfigError",
    "ExecutionRegion",
    "InternalOrderParams",
    "InvalidRunError",
    "MarketParams",
    "NumericalError",
    "QuoteLadder",
    "ScenarioName",
    "SimConfig",
    "SimState",
    "SolverGrid",
    "StabilityError",
    "StationaryPolicy",
    "StrategyDecision",
    "SummaryStats",
    "ValueSurface",
    "as_depths",
    "continuation_rhs",
    "decide",
    "effective_offset",
    "fill_intensity",
    "intervention_value",
    "naive_decision",
    "optimal_depth",
    "calibrated_market_params",
    "qvi_residual",
    "run_monte_carlo",
    "scenario_preset",
    "simulate_path",
    "solve",
    "stationary_policy",
    "step",
    "sweep",
    "vwap_adjusted_ask",
    "write_path_records",
]
