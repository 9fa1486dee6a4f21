"""Experiment configuration: YAML schema, defaults, validation and hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigError
from .params import MarketParams, ScenarioName, calibrated_market_params
from .simulator import SimConfig

__all__ = ["SolverSettings", "ExperimentConfig", "load_config", "default_config"]


@dataclass(frozen=True)
class SolverSettings:
    dt: float = 0.01
    q_min: int = -30
    q_max: int = 30

    def to_dict(self) -> dict:
        return {"dt": self.dt, "q_min": self.q_min, "q_max": self.q_max}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything the CLI commands need; defaults reproduce the desk-scale study."""

    market: MarketParams
    scenarios: tuple[ScenarioName, ...]
    rho_grid: tuple[float, ...]
    fee: float
    margin: float
    fee_grid: tuple[float, ...]
    margin_grid: tuple[float, ...]
    boundary_rho_grid: tuple[float, ...]
    solver: SolverSettings
    sim: SimConfig
    out_dir: str = "out"

    def __post_init__(self):
        if not self.scenarios:
            raise ConfigError("at least one scenario is required")
        for grid, name in (
            (self.rho_grid, "rho_grid"),
            (self.fee_grid, "fee_grid"),
            (self.margin_grid, "margin_grid"),
            (self.boundary_rho_grid, "boundary_rho_grid"),
        ):
            if not grid:
                raise ConfigError(f"{name} must be non-empty")
        if self.fee < 0 or self.margin < 0:
            raise ConfigError("fee and margin must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "market": self.market.to_dict(),
            "scenarios": [s.value for s in self.scenarios],
            "rho_grid": list(self.rho_grid),
            "fee": self.fee,
            "margin": self.margin,
            "fee_grid": list(self.fee_grid),
            "margin_grid": list(self.margin_grid),
            "boundary_rho_grid": list(self.boundary_rho_grid),
            "solver": self.solver.to_dict(),
            "sim": {
                "dt": self.sim.dt,
                "horizon": self.sim.horizon,
                "n_paths": self.sim.n_paths,
                "seed": self.sim.seed,
                "q0": self.sim.q0,
                "x0": self.sim.x0,
                "l0": self.sim.l0,
                "s0": self.sim.s0,
                "sigma": self.sim.sigma,
                "report_scale": self.sim.report_scale,
            },
            "out_dir": self.out_dir,
        }

    def config_hash(self) -> str:
        """Short stable digest of everything that affects outputs (except out_dir)."""
        payload = self.to_dict()
        payload.pop("out_dir")
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def default_config() -> ExperimentConfig:
    return ExperimentConfig(
        market=calibrated_market_params(),
        scenarios=(ScenarioName.ICEBERG, ScenarioName.TWAP, ScenarioName.FULL_AMOUNT),
        rho_grid=(-0.2, 0.0, 0.2),
        fee=0.0,
        margin=0.1,
        fee_grid=(0.0, 0.05, 0.1, 0.15, 0.2),
        margin_grid=(0.0, 0.05, 0.1, 0.15, 0.2),
        boundary_rho_grid=(-0.2, -0.15, -0.1, -0.05, 0.0, 0.05, 0.1, 0.15, 0.2),
        solver=SolverSettings(),
        sim=SimConfig(),
        out_dir="out",
    )


def _build(data: dict) -> ExperimentConfig:
    base = default_config()
    market = MarketParams.from_dict({**base.market.to_dict(), **data.get("market", {})})
    scenarios = tuple(
        ScenarioName.parse(s) for s in data.get("scenarios", [s.value for s in base.scenarios])
    )
    solver_d = {**base.solver.to_dict(), **data.get("solver", {})}
    solver = SolverSettings(
        dt=float(solver_d["dt"]), q_min=int(solver_d["q_min"]), q_max=int(solver_d["q_max"])
    )
    sim_d = data.get("sim", {})
    sim = SimConfig(
        dt=float(sim_d.get("dt", base.sim.dt)),
        horizon=float(sim_d.get("horizon", market.horizon)),
        n_paths=int(sim_d.get("n_paths", base.sim.n_paths)),
        seed=int(sim_d.get("seed", base.sim.seed)),
        q0=int(sim_d.get("q0", base.sim.q0)),
        x0=float(sim_d.get("x0", base.sim.x0)),
        l0=None if sim_d.get("l0") is None else int(sim_d["l0"]),
        s0=float(sim_d.get("s0", base.sim.s0)),
        sigma=None if sim_d.get("sigma") is None else float(sim_d["sigma"]),
        report_scale=float(sim_d.get("report_scale", base.sim.report_scale)),
    )
    return ExperimentConfig(
        market=market,
        scenarios=scenarios,
        rho_grid=tuple(float(v) for v in data.get("rho_grid", base.rho_grid)),
        fee=float(data.get("fee", base.fee)),
        margin=float(data.get("margin", base.margin)),
        fee_grid=tuple(float(v) for v in data.get("fee_grid", base.fee_grid)),
        margin_grid=tuple(float(v) for v in data.get("margin_grid", base.margin_grid)),
        boundary_rho_grid=tuple(
            float(v) for v in data.get("boundary_rho_grid", base.boundary_rho_grid)
        ),
        solver=solver,
        sim=sim,
        out_dir=str(data.get("out_dir", base.out_dir)),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a YAML config file; every key is optional and defaults to the study values."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed config file {path}: {e}") from e
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
    try:
        return _build(data)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid config: {e}") from e
