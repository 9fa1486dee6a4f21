"""Model constants: external OTC market, internal-exchange order model, scenario presets.

All prices, offsets and depths are expressed in one common price unit (the
inverse of the unit kappa is quoted in). Converting to a currency for
reporting is a presentation-layer multiplication, see the CLI docs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping

__all__ = [
    "MarketParams",
    "InternalOrderParams",
    "ScenarioName",
    "fill_intensity",
    "effective_offset",
    "scenario_preset",
    "calibrated_market_params",
]

SIDES = ("bid", "ask")


@dataclass(frozen=True)
class MarketParams:
    """External OTC market and penalty constants.

    sigma       mid-price volatility, price-units per sqrt(second). The model
                value is not pinned by the calibration set; default 1.0,
                override in config. Mean P&L is sigma-independent.
    sizes       distinct order sizes z1 < z2 < ... (millions notional)
    lambda_bid  size -> base fill intensity on the bid, 1/second
    lambda_ask  size -> base fill intensity on the ask, 1/second
    kappa       size -> spread sensitivity of the fill intensity, 1/price-unit
    alpha       terminal inventory penalty, price-units per size^2
    phi         running inventory penalty, price-units per size^2 per second
    psi         running penalty per unit of unfilled internal order, per second
    horizon     trading period T, seconds
    """

    sigma: float
    sizes: tuple[int, ...]
    lambda_bid: Mapping[int, float]
    lambda_ask: Mapping[int, float]
    kappa: Mapping[int, float]
    alpha: float
    phi: float
    psi: float
    horizon: float

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(z) for z in self.sizes))
        object.__setattr__(self, "lambda_bid", dict(self.lambda_bid))
        object.__setattr__(self, "lambda_ask", dict(self.lambda_ask))
        object.__setattr__(self, "kappa", dict(self.kappa))
        if not self.sizes:
            raise ValueError("sizes must be non-empty")
        if any(z < 1 for z in self.sizes):
            raise ValueError("minimum order size is 1")
        if any(a >= b for a, b in zip(self.sizes, self.sizes[1:])):
            raise ValueError("sizes must be strictly increasing")
        for m, name in ((self.lambda_bid, "lambda_bid"), (self.lambda_ask, "lambda_ask"), (self.kappa, "kappa")):
            if set(m) != set(self.sizes):
                raise ValueError(f"{name} keys must match sizes")
            if any(v <= 0 for v in m.values()):
                raise ValueError(f"{name} values must be strictly positive")
        if self.alpha < 0 or self.phi < 0 or self.psi < 0:
            raise ValueError("penalties alpha, phi, psi must be nonnegative")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    def lam(self, side: str, size: int) -> float:
        if side not in SIDES:
            raise ValueError(f"unknown side {side!r}")
        table = self.lambda_bid if side == "bid" else self.lambda_ask
        if size not in table:
            raise ValueError(f"unknown order size {size}")
        return table[size]

    def kap(self, size: int) -> float:
        if size not in self.kappa:
            raise ValueError(f"unknown order size {size}")
        return self.kappa[size]

    def total_intensity(self) -> float:
        """Sum of base intensities over all sizes and both sides."""
        return sum(self.lambda_bid.values()) + sum(self.lambda_ask.values())

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "sizes": list(self.sizes),
            "lambda_bid": {str(k): v for k, v in self.lambda_bid.items()},
            "lambda_ask": {str(k): v for k, v in self.lambda_ask.items()},
            "kappa": {str(k): v for k, v in self.kappa.items()},
            "alpha": self.alpha,
            "phi": self.phi,
            "psi": self.psi,
            "horizon": self.horizon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MarketParams":
        return cls(
            sigma=float(d.get("sigma", 1.0)),
            sizes=tuple(int(z) for z in d["sizes"]),
            lambda_bid={int(k): float(v) for k, v in d["lambda_bid"].items()},
            lambda_ask={int(k): float(v) for k, v in d["lambda_ask"].items()},
            kappa={int(k): float(v) for k, v in d["kappa"].items()},
            alpha=float(d["alpha"]),
            phi=float(d["phi"]),
            psi=float(d["psi"]),
            horizon=float(d["horizon"]),
        )


@dataclass(frozen=True)
class InternalOrderParams:
    """Internal-exchange order model.

    lbar       initial/replenished order size, integer units
    nu         cancellation intensity, 1/second
    mu         arrival intensity when no order is present, 1/second
    p          probability of instantaneous replenishment after the last
               unit is consumed
    rho_tilde  client's price offset from mid, price-units (any sign)
    xi         fee per unit paid by the client to the dealer, price-units
    enabled    False means no internal exchange at all (L identically 0);
               this is a distinct state, not a degenerate-intensity limit
    """

    lbar: int = 1
    nu: float = 0.0
    mu: float = 0.0
    p: float = 0.0
    rho_tilde: float = 0.0
    xi: float = 0.0
    enabled: bool = True

    def __post_init__(self):
        if self.nu < 0 or self.mu < 0:
            raise ValueError("nu and mu must be nonnegative")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.xi < 0:
            raise ValueError("xi must be nonnegative")
        if self.enabled and self.lbar < 1:
            raise ValueError("lbar must be at least 1 for an active order model")

    @classmethod
    def disabled(cls) -> "InternalOrderParams":
        """No internal exchange: L is identically zero."""
        return cls(lbar=1, nu=0.0, mu=0.0, p=0.0, rho_tilde=0.0, xi=0.0, enabled=False)

    def with_offsets(self, rho_tilde: float | None = None, xi: float | None = None) -> "InternalOrderParams":
        kw = {}
        if rho_tilde is not None:
            kw["rho_tilde"] = rho_tilde
        if xi is not None:
            kw["xi"] = xi
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {
            "lbar": self.lbar,
            "nu": self.nu,
            "mu": self.mu,
            "p": self.p,
            "rho_tilde": self.rho_tilde,
            "xi": self.xi,
            "enabled": self.enabled,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InternalOrderParams":
        return cls(
            lbar=int(d.get("lbar", 1)),
            nu=float(d.get("nu", 0.0)),
            mu=float(d.get("mu", 0.0)),
            p=float(d.get("p", 0.0)),
            rho_tilde=float(d.get("rho_tilde", 0.0)),
            xi=float(d.get("xi", 0.0)),
            enabled=bool(d.get("enabled", True)),
        )


class ScenarioName(Enum):
    """Client placement algorithms with named parameter presets."""

    ICEBERG = "iceberg"
    TWAP = "twap"
    FULL_AMOUNT = "full_amount"

    @classmethod
    def parse(cls, name: str) -> "ScenarioName":
        key = name.strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {
            "iceberg": cls.ICEBERG,
            "twap": cls.TWAP,
            "full_amount": cls.FULL_AMOUNT,
            "fullamount": cls.FULL_AMOUNT,
            "fa": cls.FULL_AMOUNT,
        }
        if key not in aliases:
            raise ValueError(f"unknown scenario {name!r}")
        return aliases[key]


def fill_intensity(side: str, size: int, delta: float, params: MarketParams) -> float:
    """Controlled fill intensity lambda * exp(-kappa * delta) for one (side, size).

    Strictly positive for finite delta and strictly decreasing in delta.
    """
    return params.lam(side, size) * math.exp(-params.kap(size) * delta)


def effective_offset(params: InternalOrderParams) -> float:
    """Net price offset the dealer pays over mid when taking: rho_tilde - xi."""
    return params.rho_tilde - params.xi


_PRESETS = {
    ScenarioName.ICEBERG: dict(lbar=1, nu=0.001, mu=0.0, p=0.9),
    ScenarioName.TWAP: dict(lbar=1, nu=0.001, mu=0.05, p=0.0),
    ScenarioName.FULL_AMOUNT: dict(lbar=10, nu=0.001, mu=0.0, p=0.0),
}


def scenario_preset(name: ScenarioName, rho_tilde: float = 0.0, xi: float = 0.0) -> InternalOrderParams:
    """Internal-order parameters for a named client algo, with offsets passed through."""
    base = _PRESETS[ScenarioName(name)]
    return InternalOrderParams(rho_tilde=rho_tilde, xi=xi, enabled=True, **base)


def calibrated_market_params(sigma: float = 1.0) -> MarketParams:
    """Calibrated desk-scale market constants used throughout the experiments.

    sigma is not part of the calibration set and defaults to 1 price-unit
    per sqrt(second); pass another value to override.
    """
    return MarketParams(
        sigma=sigma,
        sizes=(1, 5, 10),
        lambda_bid={1: 0.2, 5: 0.005, 10: 0.001},
        lambda_ask={1: 0.2, 5: 0.005, 10: 0.001},
        kappa={1: 1.5, 5: 1.0, 10: 0.5},
        alpha=0.001,
        phi=0.001,
        psi=0.01,
        horizon=300.0,
    )
