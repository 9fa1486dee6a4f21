"""Strategies on top of a solved value surface: quote ladders and execute decisions."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .solver import ValueSurface

__all__ = [
    "QuoteLadder",
    "StrategyDecision",
    "PolicyDiagnostics",
    "StationaryPolicy",
    "decide",
    "stationary_policy",
    "depth_planes",
]


@dataclass(frozen=True)
class QuoteLadder:
    """Per-size bid/ask half-spreads at one state; None marks an unquoted size
    (the fill would push inventory off the grid)."""

    sizes: tuple[int, ...]
    bid: tuple[float | None, ...]
    ask: tuple[float | None, ...]

    def __post_init__(self):
        if not (len(self.sizes) == len(self.bid) == len(self.ask)):
            raise ValueError("sizes, bid and ask must have equal length")

    def bid_for(self, size: int) -> float | None:
        return self.bid[self.sizes.index(size)]

    def ask_for(self, size: int) -> float | None:
        return self.ask[self.sizes.index(size)]


@dataclass(frozen=True)
class StrategyDecision:
    ladder: QuoteLadder
    execute_now: bool


@dataclass
class PolicyDiagnostics:
    """Mutable counters; runs that clamped inventory are not valid experiments."""

    clamp_count: int = 0


def depth_planes(surface: ValueSurface, t_level: int) -> tuple[np.ndarray, np.ndarray]:
    """Optimal bid/ask depths for a whole level.

    Returns (bid, ask) arrays of shape (n_q, n_l, n_sizes) with NaN where the
    destination inventory would leave the grid.
    """
    g = surface.grid
    h = surface.h[surface._check_level(t_level)]
    n_q, n_l = h.shape
    K = len(surface.market.sizes)
    bid = np.full((n_q, n_l, K), np.nan)
    ask = np.full((n_q, n_l, K), np.nan)
    for k, z in enumerate(surface.market.sizes):
        kapz = surface.market.kappa[z]
        if z < n_q:
            bid[: n_q - z, :, k] = 1.0 / kapz + (h[: n_q - z, :] - h[z:, :]) / z
            ask[z:, :, k] = 1.0 / kapz + (h[z:, :] - h[: n_q - z, :]) / z
    return bid, ask


def _ladder_from_planes(bid: np.ndarray, ask: np.ndarray, sizes, qi: int, li: int) -> QuoteLadder:
    b = tuple(None if np.isnan(v) else float(v) for v in bid[qi, li])
    a = tuple(None if np.isnan(v) else float(v) for v in ask[qi, li])
    return QuoteLadder(sizes=tuple(sizes), bid=b, ask=a)


def _clamp_q(surface: ValueSurface, q: int, diagnostics: PolicyDiagnostics | None) -> int:
    g = surface.grid
    if g.q_min <= q <= g.q_max:
        return int(q)
    if diagnostics is not None:
        diagnostics.clamp_count += 1
    return min(g.q_max, max(g.q_min, int(q)))


def decide(
    surface: ValueSurface,
    t: float,
    q: int,
    l: int,
    diagnostics: PolicyDiagnostics | None = None,
) -> StrategyDecision:
    """Quote ladder and execute flag at time t (nearest solved level not later than t).

    Off-grid inventory clamps to the boundary node and bumps the diagnostics
    counter instead of raising, so a simulation can keep going and flag the
    run afterwards.
    """
    g = surface.grid
    level = g.level_of_time(t)
    qc = _clamp_q(surface, q, diagnostics)
    li = g.l_index(l)
    bid, ask = depth_planes(surface, level)
    qi = g.q_index(qc)
    ladder = _ladder_from_planes(bid, ask, surface.market.sizes, qi, li)
    execute = bool(surface.region[level, qi, li])
    return StrategyDecision(ladder=ladder, execute_now=execute)


@dataclass(frozen=True)
class StationaryPolicy:
    """The t=0 slice of a solved surface frozen as a time-independent policy."""

    sizes: tuple[int, ...]
    q_min: int
    q_max: int
    n_l: int
    bid: np.ndarray  # (n_q, n_l, K), NaN = unquoted
    ask: np.ndarray
    execute: np.ndarray  # bool (n_q, n_l)
    diagnostics: PolicyDiagnostics = field(default_factory=PolicyDiagnostics)

    def _qi(self, q: int) -> int:
        if q < self.q_min or q > self.q_max:
            self.diagnostics.clamp_count += 1
            q = min(self.q_max, max(self.q_min, int(q)))
        return int(q) - self.q_min

    def decide(self, q: int, l: int) -> StrategyDecision:
        qi = self._qi(q)
        if not 0 <= l < self.n_l:
            raise ValueError(f"liquidity level {l} outside [0, {self.n_l - 1}]")
        ladder = _ladder_from_planes(self.bid, self.ask, self.sizes, qi, int(l))
        return StrategyDecision(ladder=ladder, execute_now=bool(self.execute[qi, int(l)]))

    def to_csv(self, path: str | Path, header_comment: str = "") -> None:
        """Flat (q, l, per-size depths, execute) dump; empty cells mean unquoted."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            if header_comment:
                f.write(f"# {header_comment}\n")
            w = csv.writer(f)
            cols = ["q", "l"]
            for z in self.sizes:
                cols += [f"bid_depth_{z}", f"ask_depth_{z}"]
            cols.append("execute")
            w.writerow(cols)
            for qi in range(self.bid.shape[0]):
                for li in range(self.n_l):
                    row = [qi + self.q_min, li]
                    for k in range(len(self.sizes)):
                        b, a = self.bid[qi, li, k], self.ask[qi, li, k]
                        row.append("" if np.isnan(b) else repr(float(b)))
                        row.append("" if np.isnan(a) else repr(float(a)))
                    row.append(int(self.execute[qi, li]))
                    w.writerow(row)


def stationary_policy(surface: ValueSurface) -> StationaryPolicy:
    """Freeze the t=0 decision table, for steady-state experiments far from the horizon."""
    g = surface.grid
    bid, ask = depth_planes(surface, 0)
    return StationaryPolicy(
        sizes=tuple(surface.market.sizes),
        q_min=g.q_min,
        q_max=g.q_max,
        n_l=g.n_l,
        bid=bid,
        ask=ask,
        execute=surface.region[0].copy(),
    )
