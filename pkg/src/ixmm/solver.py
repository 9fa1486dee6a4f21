"""Backward-in-time solver for the quote/execute value function on a (t, q, l) grid.

State: q is dealer inventory (integer nodes), l is the visible size of the
client's resting internal-exchange order (0 means absent). The value h is the
cash- and mid-free part of the dealer's objective. Scheme: explicit time
marching from the terminal slice h(T, q, l) = -alpha q^2; at each level the
continuation update is followed by an obstacle pass that applies the
take-one-unit intervention until no node improves, so chained takes within a
single instant are representable.

Conventions baked into both the fast kernel and the reference operators:
  - a fill of size z whose destination q+z (bid) or q-z (ask) leaves the grid
    contributes nothing (the dealer refuses quotes that would breach bounds);
  - client cancellation removes the order entirely (l -> 0), arrivals only
    occur at l = 0 and restore l = lbar;
  - taking the last unit replenishes to lbar with probability p;
  - ties between continuation and intervention are labeled as intervention.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .errors import NumericalError, StabilityError
from .params import InternalOrderParams, MarketParams, effective_offset

__all__ = [
    "SolverGrid",
    "ValueSurface",
    "ExecutionRegion",
    "solve",
    "continuation_rhs",
    "intervention_value",
    "optimal_depth",
    "qvi_residual",
]

# shared by the kernel and the reference operators so both evaluate the
# same floating-point expression
INV_E = math.exp(-1.0)


@dataclass(frozen=True)
class SolverGrid:
    """Discretization of the (t, q, l) domain.

    n_t * dt equals the horizon; q nodes are the integers q_min..q_max;
    l_values is 0..lbar (just (0,) when the internal exchange is disabled).
    """

    dt: float
    n_t: int
    q_min: int
    q_max: int
    l_values: tuple[int, ...]

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_t < 1:
            raise ValueError("need at least one time step")
        if not self.q_min < 0 < self.q_max:
            raise ValueError("q grid must straddle zero")
        if self.l_values[0] != 0 or list(self.l_values) != list(range(len(self.l_values))):
            raise ValueError("l_values must be contiguous from 0")

    @classmethod
    def for_model(
        cls,
        market: MarketParams,
        internal: InternalOrderParams,
        dt: float = 0.01,
        q_min: int = -30,
        q_max: int = 30,
    ) -> "SolverGrid":
        """Build a grid for the given model and check the stability bound."""
        n_t = int(round(market.horizon / dt))
        if n_t < 1 or abs(n_t * dt - market.horizon) > 1e-9 * max(1.0, market.horizon):
            raise ValueError(f"dt={dt} does not divide horizon={market.horizon}")
        grid = cls(
            dt=dt,
            n_t=n_t,
            q_min=int(q_min),
            q_max=int(q_max),
            l_values=tuple(range(internal.lbar + 1)) if internal.enabled else (0,),
        )
        check_stability(market, internal, dt)
        return grid

    @property
    def n_q(self) -> int:
        return self.q_max - self.q_min + 1

    @property
    def n_l(self) -> int:
        return len(self.l_values)

    @property
    def horizon(self) -> float:
        return self.n_t * self.dt

    def q_index(self, q: int) -> int:
        if not self.q_min <= q <= self.q_max:
            raise ValueError(f"inventory {q} outside grid [{self.q_min}, {self.q_max}]")
        return int(q) - self.q_min

    def l_index(self, l: int) -> int:
        if not 0 <= l < self.n_l:
            raise ValueError(f"liquidity level {l} outside grid [0, {self.n_l - 1}]")
        return int(l)

    def level_of_time(self, t: float) -> int:
        """Nearest solved level not later than t."""
        if t < -1e-9 or t > self.horizon + 1e-9:
            raise ValueError(f"time {t} outside [0, {self.horizon}]")
        return min(self.n_t, max(0, int(math.floor(t / self.dt + 1e-9))))

    def to_dict(self) -> dict:
        return {
            "dt": self.dt,
            "n_t": self.n_t,
            "q_min": self.q_min,
            "q_max": self.q_max,
            "l_values": list(self.l_values),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolverGrid":
        return cls(
            dt=float(d["dt"]),
            n_t=int(d["n_t"]),
            q_min=int(d["q_min"]),
            q_max=int(d["q_max"]),
            l_values=tuple(int(v) for v in d["l_values"]),
        )


def stability_product(market: MarketParams, internal: InternalOrderParams, dt: float) -> float:
    extra = internal.nu + internal.mu if internal.enabled else 0.0
    return dt * (market.total_intensity() + extra)


def check_stability(market: MarketParams, internal: InternalOrderParams, dt: float) -> None:
    prod = stability_product(market, internal, dt)
    if prod >= 1.0:
        raise StabilityError(
            f"explicit scheme unstable: dt * total event rate = {prod:.3g} >= 1; reduce dt"
        )


@dataclass(frozen=True)
class ExecutionRegion:
    """Per-level set of (q, l) nodes where taking the internal order is optimal."""

    mask: np.ndarray  # bool, shape (n_t + 1, n_q, n_l)
    grid: SolverGrid

    def contains(self, t_level: int, q: int, l: int) -> bool:
        return bool(self.mask[t_level, self.grid.q_index(q), self.grid.l_index(l)])

    def boundary(self, t_level: int, l: int) -> int | None:
        """Largest q in the region at (t_level, l), or None if the region is empty."""
        col = self.mask[t_level, :, self.grid.l_index(l)]
        idx = np.nonzero(col)[0]
        if idx.size == 0:
            return None
        return int(idx[-1]) + self.grid.q_min


@dataclass(frozen=True)
class ValueSurface:
    """Solved value function h over the grid, plus the execution region mask."""

    h: np.ndarray  # float64, shape (n_t + 1, n_q, n_l)
    region: np.ndarray  # bool, same shape
    grid: SolverGrid
    market: MarketParams
    internal: InternalOrderParams

    def value(self, t_level: int, q: int, l: int) -> float:
        return float(self.h[self._check_level(t_level), self.grid.q_index(q), self.grid.l_index(l)])

    def _check_level(self, t_level: int) -> int:
        if not 0 <= t_level <= self.grid.n_t:
            raise ValueError(f"time level {t_level} outside [0, {self.grid.n_t}]")
        return int(t_level)

    @property
    def rho(self) -> float:
        return effective_offset(self.internal)

    def save(self, directory: str | Path) -> None:
        """Dump h/region as .npy plus a JSON metadata record (deterministic bytes)."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        np.save(d / "h.npy", self.h)
        np.save(d / "region.npy", self.region)
        meta = {
            "grid": self.grid.to_dict(),
            "market": self.market.to_dict(),
            "internal": self.internal.to_dict(),
        }
        (d / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")

    @classmethod
    def load(cls, directory: str | Path) -> "ValueSurface":
        d = Path(directory)
        meta = json.loads((d / "meta.json").read_text())
        return cls(
            h=np.load(d / "h.npy"),
            region=np.load(d / "region.npy"),
            grid=SolverGrid.from_dict(meta["grid"]),
            market=MarketParams.from_dict(meta["market"]),
            internal=InternalOrderParams.from_dict(meta["internal"]),
        )


def _model_arrays(market: MarketParams):
    sizes = np.array(market.sizes, dtype=np.int64)
    lam_b = np.array([market.lambda_bid[z] for z in market.sizes], dtype=np.float64)
    lam_a = np.array([market.lambda_ask[z] for z in market.sizes], dtype=np.float64)
    kap = np.array([market.kappa[z] for z in market.sizes], dtype=np.float64)
    return sizes, lam_b, lam_a, kap


@njit(cache=True)
def _solve_kernel(h, region, sizes, lam_b, lam_a, kap, q_min,
                  alpha, phi, psi, dt, nu, mu, p, rho, enabled):
    n_t1, n_q, n_l = h.shape
    n_sizes = sizes.shape[0]
    inv_e = INV_E

    for qi in range(n_q):
        q = q_min + qi
        # association matches alpha * (q*q) so the terminal slice cancels
        # bitwise against the penalty term computed elsewhere
        v = -(alpha * (q * q))
        for li in range(n_l):
            h[n_t1 - 1, qi, li] = v

    cont = np.empty((n_q, n_l), dtype=np.float64)
    for i in range(n_t1 - 2, -1, -1):
        prev = h[i + 1]
        for qi in range(n_q):
            q = q_min + qi
            for li in range(n_l):
                r = -phi * q * q - psi * li
                acc = 0.0
                for k in range(n_sizes):
                    z = sizes[k]
                    t_bid = 0.0
                    t_ask = 0.0
                    if qi + z < n_q:
                        t_bid = z * lam_b[k] * inv_e / kap[k] * math.exp(
                            (kap[k] / z) * (prev[qi + z, li] - prev[qi, li])
                        )
                    if qi - z >= 0:
                        t_ask = z * lam_a[k] * inv_e / kap[k] * math.exp(
                            (kap[k] / z) * (prev[qi - z, li] - prev[qi, li])
                        )
                    # pair sum keeps the level update exactly symmetric
                    # under q <-> -q with bid/ask swapped
                    acc += t_bid + t_ask
                r += acc
                if enabled:
                    if li > 0:
                        r += nu * (prev[qi, 0] - prev[qi, li])
                    elif mu > 0.0:
                        r += mu * (prev[qi, n_l - 1] - prev[qi, 0])
                cont[qi, li] = prev[qi, li] + dt * r
                h[i, qi, li] = cont[qi, li]

        if enabled and n_l > 1:
            # obstacle pass: destinations sit at q+1, so a descending q sweep
            # settles chained takes; repeat until no node changes
            changed = True
            while changed:
                changed = False
                for qi in range(n_q - 2, -1, -1):
                    for li in range(1, n_l):
                        if li == 1:
                            cand = p * h[i, qi + 1, n_l - 1] + (1.0 - p) * h[i, qi + 1, 0] - rho
                        else:
                            cand = h[i, qi + 1, li - 1] - rho
                        if cand > h[i, qi, li]:
                            h[i, qi, li] = cand
                            changed = True
            for qi in range(n_q - 1):
                for li in range(1, n_l):
                    if li == 1:
                        cand = p * h[i, qi + 1, n_l - 1] + (1.0 - p) * h[i, qi + 1, 0] - rho
                    else:
                        cand = h[i, qi + 1, li - 1] - rho
                    region[i, qi, li] = cand >= cont[qi, li]


def solve(
    market: MarketParams,
    internal: InternalOrderParams,
    grid: SolverGrid,
) -> tuple[ValueSurface, ExecutionRegion]:
    """Solve backward from the terminal slice and extract the execution region."""
    check_stability(market, internal, grid.dt)
    expected_l = internal.lbar + 1 if internal.enabled else 1
    if grid.n_l != expected_l:
        raise ValueError(f"grid has {grid.n_l} liquidity levels, model needs {expected_l}")

    sizes, lam_b, lam_a, kap = _model_arrays(market)
    h = np.empty((grid.n_t + 1, grid.n_q, grid.n_l), dtype=np.float64)
    region = np.zeros(h.shape, dtype=np.bool_)
    _solve_kernel(
        h, region, sizes, lam_b, lam_a, kap, grid.q_min,
        market.alpha, market.phi, market.psi, grid.dt,
        internal.nu, internal.mu, internal.p,
        effective_offset(internal), internal.enabled,
    )
    if not np.isfinite(h).all():
        raise NumericalError("solve produced non-finite values; check parameters and dt")
    surface = ValueSurface(h=h, region=region, grid=grid, market=market, internal=internal)
    return surface, ExecutionRegion(mask=region, grid=grid)


def _rhs_planes(h_planes: np.ndarray, market: MarketParams, internal: InternalOrderParams,
                grid: SolverGrid) -> np.ndarray:
    """Continuation right-hand side evaluated on h slices of shape (..., n_q, n_l)."""
    n_q, n_l = h_planes.shape[-2], h_planes.shape[-1]
    q = np.arange(grid.q_min, grid.q_max + 1, dtype=np.float64)
    l = np.arange(n_l, dtype=np.float64)
    out = -market.phi * q[:, None] ** 2 - market.psi * l[None, :]
    out = np.broadcast_to(out, h_planes.shape).copy()
    for z in market.sizes:
        kapz = market.kappa[z]
        t_bid = np.zeros_like(h_planes)
        t_ask = np.zeros_like(h_planes)
        t_bid[..., : n_q - z, :] = (
            z * market.lambda_bid[z] * INV_E / kapz
            * np.exp((kapz / z) * (h_planes[..., z:, :] - h_planes[..., : n_q - z, :]))
        )
        t_ask[..., z:, :] = (
            z * market.lambda_ask[z] * INV_E / kapz
            * np.exp((kapz / z) * (h_planes[..., : n_q - z, :] - h_planes[..., z:, :]))
        )
        out += t_bid + t_ask
    if internal.enabled:
        if n_l > 1:
            out[..., :, 1:] += internal.nu * (h_planes[..., :, :1] - h_planes[..., :, 1:])
        if internal.mu > 0.0:
            out[..., :, 0] += internal.mu * (h_planes[..., :, n_l - 1] - h_planes[..., :, 0])
    return out


def _intervention_planes(h_planes: np.ndarray, internal: InternalOrderParams) -> np.ndarray:
    """Intervention value on h slices; NaN where taking is impossible (l=0 or q at top)."""
    out = np.full(h_planes.shape, np.nan)
    if not internal.enabled or h_planes.shape[-1] < 2:
        return out
    p, rho = internal.p, effective_offset(internal)
    out[..., :-1, 1] = p * h_planes[..., 1:, -1] + (1.0 - p) * h_planes[..., 1:, 0] - rho
    if h_planes.shape[-1] > 2:
        out[..., :-1, 2:] = h_planes[..., 1:, 1:-1] - rho
    return out


def continuation_rhs(surface: ValueSurface, t_level: int, q: int, l: int) -> float:
    """Continuation drift at one node, evaluated on the h slice at t_level."""
    lev = surface._check_level(t_level)
    qi = surface.grid.q_index(q)
    li = surface.grid.l_index(l)
    plane = _rhs_planes(surface.h[lev], surface.market, surface.internal, surface.grid)
    return float(plane[qi, li])


def intervention_value(surface: ValueSurface, t_level: int, q: int, l: int) -> float:
    """Value of taking one unit now at (t_level, q, l); requires l >= 1 and q+1 on grid."""
    lev = surface._check_level(t_level)
    li = surface.grid.l_index(l)
    if li < 1:
        raise ValueError("intervention requires at least one unit of internal liquidity")
    qi = surface.grid.q_index(q)
    if qi + 1 >= surface.grid.n_q:
        raise ValueError("intervention destination q+1 leaves the grid")
    plane = _intervention_planes(surface.h[lev], surface.internal)
    return float(plane[qi, li])


def optimal_depth(surface: ValueSurface, t_level: int, q: int, l: int, side: str, size: int) -> float:
    """Optimal half-spread 1/kappa + (h(q) - h(q -+/+ z))/z; may be negative."""
    lev = surface._check_level(t_level)
    kapz = surface.market.kap(size)  # validates side-independent size
    if side not in ("bid", "ask"):
        raise ValueError(f"unknown side {side!r}")
    qi = surface.grid.q_index(q)
    li = surface.grid.l_index(l)
    dest = qi + size if side == "bid" else qi - size
    if not 0 <= dest < surface.grid.n_q:
        raise ValueError(f"size {size} {side} quote at q={q} would leave the inventory grid")
    here = surface.h[lev, qi, li]
    there = surface.h[lev, dest, li]
    return float(1.0 / kapz + (here - there) / size)


def obstacle_gap(surface: ValueSurface, chunk: int = 512) -> float:
    """Smallest h - intervention_value over nodes where taking is possible.

    Spans every level except the terminal one (the terminal slice is assigned,
    not maximized). Nonnegative up to floating noise on a correct solve: the
    value dominates the obstacle everywhere the equation holds.
    """
    if not surface.internal.enabled or surface.grid.n_l < 2:
        return float("inf")
    h = surface.h[:-1]
    worst = float("inf")
    for start in range(0, h.shape[0], chunk):
        cur = h[start : start + chunk]
        gap = cur - _intervention_planes(cur, surface.internal)
        worst = min(worst, float(np.nanmin(gap)))
    return worst


def qvi_residual(surface: ValueSurface, chunk: int = 512) -> float:
    """Self-consistency of the solved surface against the reference operators.

    At every interior node the scheme satisfies
        0 = max( h(t+dt) - h(t) + dt * rhs(h(t+dt)),  take(h(t)) - h(t) )
    with the take branch absent where it is undefined. Returns the largest
    |max(...)| over all nodes, normalized by 1 + |h|. A correct solve is at
    floating-point noise level regardless of dt.
    """
    h = surface.h
    n_t = surface.grid.n_t
    worst = 0.0
    for start in range(0, n_t, chunk):
        stop = min(start + chunk, n_t)
        nxt = h[start + 1 : stop + 1]
        cur = h[start:stop]
        term1 = (nxt - cur) + surface.grid.dt * _rhs_planes(
            nxt, surface.market, surface.internal, surface.grid
        )
        term2 = _intervention_planes(cur, surface.internal) - cur
        resid = np.abs(np.fmax(term1, np.where(np.isnan(term2), -np.inf, term2)))
        worst = max(worst, float((resid / (1.0 + np.abs(cur))).max()))
    return worst
