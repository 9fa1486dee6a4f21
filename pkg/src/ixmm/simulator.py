"""Event-driven Monte Carlo of the quoting model under any table-driven strategy.

Each decision step applies, in order: (i) the execute rule repeatedly while it
fires and internal liquidity remains (takes are instantaneous, one unit each,
with the last-unit replenishment draw); (ii) one Bernoulli fill trial per
(side, size) at probability min(1, intensity * dt) using the post-take quote
ladder; (iii) internal order cancellation/arrival; (iv) mid-price diffusion.
Running penalties accrue by a left-endpoint rectangle rule on the post-take
state. Path k draws every variate from its own substream seeded by (seed, k),
so results are bit-identical for a given config regardless of chunking or
thread count.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol

import numpy as np

from .benchmark import BenchmarkConfig, naive_policy
from .errors import ConfigError
from .params import InternalOrderParams, MarketParams, effective_offset
from .policy import StationaryPolicy, depth_planes, stationary_policy
from .solver import SolverGrid, ValueSurface, solve

__all__ = [
    "SimConfig",
    "SimState",
    "SummaryStats",
    "PathData",
    "StationaryStrategy",
    "SurfaceStrategy",
    "step",
    "simulate_path",
    "run_monte_carlo",
    "write_path_records",
    "sweep",
]

CHUNK = 1024
REPL_BLOCK = 64


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    dt is the decision step (coarser than the solver grid); sigma defaults to
    the market's volatility; report_scale is a presentation factor applied
    only when emitting tables, never inside the simulation.
    """

    dt: float = 0.3
    horizon: float = 300.0
    n_paths: int = 5000
    seed: int = 7
    q0: int = 0
    x0: float = 0.0
    l0: int | None = None
    s0: float = 100.0
    sigma: float | None = None
    report_scale: float = 1.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.report_scale <= 0:
            raise ValueError("report_scale must be positive")

    def n_steps(self, tol: float = 1e-9) -> int:
        n = int(round(self.horizon / self.dt))
        if n < 1 or abs(n * self.dt - self.horizon) > tol * max(1.0, self.horizon):
            raise ValueError(f"dt={self.dt} does not divide horizon={self.horizon}")
        return n

    def validate_against(self, market: MarketParams) -> None:
        # Bernoulli thinning bias guard
        if self.dt * market.total_intensity() > 0.5:
            raise ConfigError("dt * total base fill intensity exceeds 0.5; reduce dt")


class Strategy(Protocol):
    sizes: tuple[int, ...]
    q_min: int
    q_max: int
    n_l: int

    def tables(self, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(execute flag, bid depths, ask depths) tables over (q, l) at time t."""
        ...


class StationaryStrategy:
    """Time-independent strategy from a frozen decision table."""

    def __init__(self, policy: StationaryPolicy):
        self.policy = policy
        self.sizes = policy.sizes
        self.q_min = policy.q_min
        self.q_max = policy.q_max
        self.n_l = policy.n_l
        self._triple = (policy.execute, policy.bid, policy.ask)

    def tables(self, t: float):
        return self._triple


class SurfaceStrategy:
    """Full time-dependent strategy; looks up the solved level not later than t."""

    def __init__(self, surface: ValueSurface):
        self.surface = surface
        self.sizes = tuple(surface.market.sizes)
        self.q_min = surface.grid.q_min
        self.q_max = surface.grid.q_max
        self.n_l = surface.grid.n_l
        self._cache: dict[int, tuple] = {}

    def tables(self, t: float):
        level = self.surface.grid.level_of_time(t)
        triple = self._cache.get(level)
        if triple is None:
            bid, ask = depth_planes(self.surface, level)
            triple = (self.surface.region[level], bid, ask)
            self._cache[level] = triple
        return triple


@dataclass
class SimState:
    """Evolving state of one path: time, mid, inventory, cash, internal size,
    cumulative takes, first-fill timestamp and penalty accumulators."""

    t: float
    s: float
    q: int
    x: float
    l: int
    m: int = 0
    first_fill: float = float("nan")
    pen_q: float = 0.0
    pen_l: float = 0.0
    clamps: int = 0


class _PathDraws:
    """Variates for one path, laid out exactly like the vectorized engine's
    blocks: fills, order events, mid increments, then replenishment on demand."""

    def __init__(self, seed: int, k: int, n_steps: int, n_sizes: int):
        self.gen = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(k,)))
        self.u_fill = self.gen.random((n_steps, n_sizes, 2))
        self.u_evt = self.gen.random(n_steps)
        self.z_mid = self.gen.standard_normal(n_steps)
        self._repl = self.gen.random(REPL_BLOCK)
        self._pos = 0

    def next_replenish(self) -> float:
        if self._pos == self._repl.shape[0]:
            self._repl = np.concatenate([self._repl, self.gen.random(REPL_BLOCK)])
        u = self._repl[self._pos]
        self._pos += 1
        return u


def step(
    state: SimState,
    strategy: Strategy,
    market: MarketParams,
    internal: InternalOrderParams,
    config: SimConfig,
    step_index: int,
    draws: _PathDraws,
    events: list | None = None,
) -> SimState:
    """Advance one decision step of a single path (plain reference engine).

    Order within the step: instantaneous take chain, penalty accrual,
    one fill trial per (side, size), internal order events, mid diffusion.
    The vectorized engine reproduces this bitwise.
    """
    dt = config.dt
    sigma = market.sigma if config.sigma is None else config.sigma
    rho = effective_offset(internal)
    lbar = internal.lbar if internal.enabled else 0
    K = len(strategy.sizes)
    exec_tab, bid_tab, ask_tab = strategy.tables(state.t)

    def qi_of(q: int) -> int:
        # lookup index clips silently; only the post-fill inventory clip counts
        return min(strategy.q_max, max(strategy.q_min, q)) - strategy.q_min

    if internal.enabled:
        while state.l >= 1 and exec_tab[qi_of(state.q), state.l]:
            cash = -(state.s + rho)
            state.x += cash
            state.q += 1
            state.m += 1
            if math.isnan(state.first_fill):
                state.first_fill = state.t
            was_last = state.l == 1
            state.l -= 1
            if events is not None:
                events.append((step_index, "take", 1, float(cash)))
            if was_last:
                if draws.next_replenish() < internal.p:
                    state.l = lbar
                    if events is not None:
                        events.append((step_index, "replenish", 0, 0.0))

    state.pen_q += (state.q * state.q) * dt
    state.pen_l += max(state.l, 0) * dt

    qi = qi_of(state.q)
    li = state.l
    for k in range(K):
        z = strategy.sizes[k]
        for side in (0, 1):
            tab = bid_tab if side == 0 else ask_tab
            d = tab[qi, li, k]
            lam = market.lambda_bid[z] if side == 0 else market.lambda_ask[z]
            # np.exp keeps the probability bitwise equal to the vectorized engine
            pfill = min(1.0, lam * float(np.exp(-market.kappa[z] * d)) * dt) if not np.isnan(d) else np.nan
            if draws.u_fill[step_index, k, side] < pfill:
                if side == 0:
                    cash = -(z * (state.s - d))
                    state.q += z
                else:
                    cash = z * (state.s + d)
                    state.q -= z
                state.x += cash
                if events is not None:
                    kind = "bid_fill" if side == 0 else "ask_fill"
                    events.append((step_index, kind, z if side == 0 else -z, float(cash)))

    if state.q < strategy.q_min or state.q > strategy.q_max:
        state.clamps += 1
        state.q = min(strategy.q_max, max(strategy.q_min, state.q))

    if internal.enabled:
        u = draws.u_evt[step_index]
        if state.l > 0 and u < internal.nu * dt:
            state.l = 0
            if events is not None:
                events.append((step_index, "cancel", 0, 0.0))
        elif state.l == 0 and u < internal.mu * dt:
            state.l = lbar
            if events is not None:
                events.append((step_index, "arrive", 0, 0.0))

    state.s += sigma * math.sqrt(dt) * draws.z_mid[step_index]
    state.t = (step_index + 1) * dt
    return state


def simulate_path(
    strategy: Strategy,
    market: MarketParams,
    internal: InternalOrderParams,
    config: SimConfig,
    path_index: int,
    log_events: bool = False,
) -> tuple[SimState, "PathData"]:
    """One full path through the reference step engine (slow, readable)."""
    config.validate_against(market)
    n_steps = config.n_steps()
    lbar = internal.lbar if internal.enabled else 0
    l0 = (lbar if internal.enabled else 0) if config.l0 is None else config.l0
    if not 0 <= l0 <= lbar:
        raise ValueError(f"initial internal size {l0} outside [0, {lbar}]")
    draws = _PathDraws(config.seed, path_index, n_steps, len(strategy.sizes))
    state = SimState(t=0.0, s=config.s0, q=config.q0, x=config.x0, l=l0)
    events = [] if log_events else None
    for s_idx in range(n_steps):
        state = step(state, strategy, market, internal, config, s_idx, draws, events)
    pnl = state.x + state.q * state.s
    objective = (
        pnl - market.alpha * (state.q * state.q)
        - market.phi * state.pen_q - market.psi * state.pen_l
    )
    record = PathData(
        pnl=np.array([pnl]),
        objective=np.array([objective]),
        first_fill=np.array([state.first_fill]),
        volume_rate=np.array([state.m / config.horizon]),
        clamps=np.array([state.clamps]),
        final_q=np.array([state.q]),
        final_x=np.array([state.x]),
        final_s=np.array([state.s]),
        events=[events] if log_events else None,
    )
    return state, record


@dataclass
class PathData:
    """Per-path outputs, in path order."""

    pnl: np.ndarray
    objective: np.ndarray
    first_fill: np.ndarray  # seconds; NaN = censored at the horizon
    volume_rate: np.ndarray
    clamps: np.ndarray
    final_q: np.ndarray
    final_x: np.ndarray
    final_s: np.ndarray
    events: list | None = None  # per path: ordered (step, kind, dq, cashflow)


@dataclass
class SummaryStats:
    n_paths: int
    seed: int
    pnl_mean: float
    pnl_std: float
    objective_mean: float
    objective_se: float
    fill_fraction: float
    first_fill_mean: float  # over filled paths; NaN when no path filled
    first_fill_std: float
    first_fill_censored_mean: float  # unfilled paths counted at the horizon
    first_fill_censored_std: float
    volume_rate_mean: float
    clamp_count: int
    valid: bool
    paths: PathData | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        d = {
            k: getattr(self, k)
            for k in (
                "n_paths", "seed", "pnl_mean", "pnl_std", "objective_mean",
                "objective_se", "fill_fraction", "first_fill_mean", "first_fill_std",
                "first_fill_censored_mean", "first_fill_censored_std",
                "volume_rate_mean", "clamp_count", "valid",
            )
        }
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _path_generators(seed: int, indices: range) -> list[np.random.Generator]:
    return [np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(k,))) for k in indices]


def _simulate_chunk(
    strategy: Strategy,
    market: MarketParams,
    internal: InternalOrderParams,
    config: SimConfig,
    indices: range,
    log_events: bool,
):
    n = len(indices)
    n_steps = config.n_steps()
    dt = config.dt
    sigma = market.sigma if config.sigma is None else config.sigma
    sig_dt = sigma * math.sqrt(dt)
    rho = effective_offset(internal)
    lbar = internal.lbar if internal.enabled else 0
    l0 = (lbar if internal.enabled else 0) if config.l0 is None else config.l0
    if not 0 <= l0 <= lbar:
        raise ValueError(f"initial internal size {l0} outside [0, {lbar}]")

    K = len(strategy.sizes)
    sizes = np.array(strategy.sizes, dtype=np.int64)
    lam = np.empty((2, K))  # side 0 = bid, 1 = ask
    kap = np.empty(K)
    for k, z in enumerate(strategy.sizes):
        lam[0, k] = market.lambda_bid[z]
        lam[1, k] = market.lambda_ask[z]
        kap[k] = market.kappa[z]

    gens = _path_generators(config.seed, indices)
    u_fill = np.stack([g.random((n_steps, K, 2)) for g in gens])
    u_evt = np.stack([g.random(n_steps) for g in gens])
    z_mid = np.stack([g.standard_normal(n_steps) for g in gens])
    repl = [g.random(REPL_BLOCK) for g in gens]
    repl_pos = np.zeros(n, dtype=np.int64)

    Q = np.full(n, config.q0, dtype=np.int64)
    X = np.full(n, config.x0, dtype=np.float64)
    S = np.full(n, config.s0, dtype=np.float64)
    L = np.full(n, l0, dtype=np.int64)
    M = np.zeros(n, dtype=np.int64)
    first_fill = np.full(n, np.nan)
    pen_q = np.zeros(n)
    pen_l = np.zeros(n)
    clamps = np.zeros(n, dtype=np.int64)
    events = [[] for _ in range(n)] if log_events else None

    q_lo, q_hi = strategy.q_min, strategy.q_max

    for s in range(n_steps):
        t = s * dt
        exec_tab, bid_tab, ask_tab = strategy.tables(t)

        # (i) instantaneous takes while the rule fires
        if internal.enabled:
            while True:
                qi = np.clip(Q - q_lo, 0, q_hi - q_lo)
                mask = exec_tab[qi, L] & (L >= 1)
                if not mask.any():
                    break
                idx = np.nonzero(mask)[0]
                cash = -(S[idx] + rho)
                X[idx] += cash
                Q[idx] += 1
                M[idx] += 1
                fresh = idx[np.isnan(first_fill[idx])]
                first_fill[fresh] = t
                last = idx[L[idx] == 1]
                L[idx] -= 1
                if log_events:
                    for j, c in zip(idx, cash):
                        events[j].append((s, "take", 1, float(c)))
                for j in last:
                    if repl_pos[j] == repl[j].shape[0]:
                        repl[j] = np.concatenate([repl[j], gens[j].random(REPL_BLOCK)])
                    u = repl[j][repl_pos[j]]
                    repl_pos[j] += 1
                    if u < internal.p:
                        L[j] = lbar
                        if log_events:
                            events[j].append((s, "replenish", 0, 0.0))

        # penalties accrue on the post-take state over [t, t + dt)
        pen_q += (Q * Q) * dt
        pen_l += np.maximum(L, 0) * dt

        # (ii) one fill trial per (side, size) at the post-take quotes
        qi = np.clip(Q - q_lo, 0, q_hi - q_lo)
        li = L
        for k in range(K):
            z = int(sizes[k])
            for side in (0, 1):
                tab = bid_tab if side == 0 else ask_tab
                d = tab[qi, li, k]
                with np.errstate(invalid="ignore", over="ignore"):
                    pfill = np.minimum(1.0, lam[side, k] * np.exp(-kap[k] * d) * dt)
                    fill = u_fill[:, s, k, side] < pfill
                if not fill.any():
                    continue
                f = np.nonzero(fill)[0]
                if side == 0:
                    cash = -(z * (S[f] - d[f]))
                    Q[f] += z
                else:
                    cash = z * (S[f] + d[f])
                    Q[f] -= z
                X[f] += cash
                if log_events:
                    kind = "bid_fill" if side == 0 else "ask_fill"
                    dq = z if side == 0 else -z
                    for j, c in zip(f, cash):
                        events[j].append((s, kind, dq, float(c)))

        off = (Q < q_lo) | (Q > q_hi)
        if off.any():
            clamps += off
            np.clip(Q, q_lo, q_hi, out=Q)

        # (iii) internal order events, branch on the liquidity entering this stage
        if internal.enabled:
            l_in = L.copy()
            u = u_evt[:, s]
            cancel = (l_in > 0) & (u < internal.nu * dt)
            arrive = (l_in == 0) & (u < internal.mu * dt)
            L[cancel] = 0
            L[arrive] = lbar
            if log_events:
                for j in np.nonzero(cancel)[0]:
                    events[j].append((s, "cancel", 0, 0.0))
                for j in np.nonzero(arrive)[0]:
                    events[j].append((s, "arrive", 0, 0.0))

        # (iv) diffuse the mid
        S += sig_dt * z_mid[:, s]

    pnl = X + Q * S
    objective = pnl - market.alpha * (Q * Q) - market.phi * pen_q - market.psi * pen_l
    return PathData(
        pnl=pnl,
        objective=objective,
        first_fill=first_fill,
        volume_rate=M / config.horizon,
        clamps=clamps,
        final_q=Q,
        final_x=X,
        final_s=S,
        events=events,
    )


def write_path_records(paths: PathData, out: str | Path, header_comment: str = "") -> Path:
    """Stream per-path records to CSV: path, pnl, objective, first_fill, volume."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as f:
        if header_comment:
            f.write(f"# {header_comment}\n")
        w = csv.writer(f)
        w.writerow(["path", "pnl", "objective", "first_fill", "volume_rate", "clamps"])
        for k in range(paths.pnl.shape[0]):
            ff = paths.first_fill[k]
            w.writerow(
                [
                    k,
                    repr(float(paths.pnl[k])),
                    repr(float(paths.objective[k])),
                    "" if np.isnan(ff) else repr(float(ff)),
                    repr(float(paths.volume_rate[k])),
                    int(paths.clamps[k]),
                ]
            )
    return out


def run_monte_carlo(
    strategy: Strategy,
    market: MarketParams,
    internal: InternalOrderParams,
    config: SimConfig,
    threads: int = 1,
    record_paths: bool = False,
    log_events: bool = False,
) -> SummaryStats:
    """Simulate n_paths independent paths and aggregate in path order."""
    config.validate_against(market)
    n = config.n_paths
    chunks = [range(a, min(a + CHUNK, n)) for a in range(0, n, CHUNK)]

    def work(rng: range) -> PathData:
        return _simulate_chunk(strategy, market, internal, config, rng, log_events)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]

    pnl = np.concatenate([p.pnl for p in parts])
    objective = np.concatenate([p.objective for p in parts])
    first_fill = np.concatenate([p.first_fill for p in parts])
    volume_rate = np.concatenate([p.volume_rate for p in parts])
    clamps = np.concatenate([p.clamps for p in parts])
    final_q = np.concatenate([p.final_q for p in parts])
    final_x = np.concatenate([p.final_x for p in parts])
    final_s = np.concatenate([p.final_s for p in parts])
    events = None
    if log_events:
        events = [ev for p in parts for ev in p.events]

    filled = ~np.isnan(first_fill)
    ff = first_fill[filled]
    censored = np.where(filled, first_fill, config.horizon)
    ddof = 1 if n > 1 else 0
    stats = SummaryStats(
        n_paths=n,
        seed=config.seed,
        pnl_mean=float(pnl.mean()),
        pnl_std=float(pnl.std(ddof=ddof)),
        objective_mean=float(objective.mean()),
        objective_se=float(objective.std(ddof=ddof) / math.sqrt(n)),
        fill_fraction=float(filled.mean()),
        first_fill_mean=float(ff.mean()) if ff.size else float("nan"),
        first_fill_std=float(ff.std(ddof=1)) if ff.size > 1 else float("nan"),
        first_fill_censored_mean=float(censored.mean()),
        first_fill_censored_std=float(censored.std(ddof=ddof)),
        volume_rate_mean=float(volume_rate.mean()),
        clamp_count=int(clamps.sum()),
        valid=bool(clamps.sum() == 0),
    )
    if record_paths or log_events:
        stats.paths = PathData(
            pnl, objective, first_fill, volume_rate, clamps, final_q, final_x, final_s, events
        )
    return stats


def sweep(
    market: MarketParams,
    internal: InternalOrderParams,
    config: SimConfig,
    axis: str,
    values: list[float],
    solver_dt: float = 0.01,
    q_min: int = -30,
    q_max: int = 30,
    threads: int = 1,
) -> list[dict]:
    """Fee or margin sweep rows for the strategy comparison.

    axis="fee" varies the per-unit fee for the optimal strategy (re-solved per
    value, since the net take price changes) and for the naive strategy at
    zero margin. axis="margin" varies the naive dealer margin at zero fee.
    Every row repeats the no-internal reference P&L for convenience.
    """
    if axis not in ("fee", "margin"):
        raise ValueError("axis must be 'fee' or 'margin'")
    ref_internal = InternalOrderParams.disabled()
    ref_grid = SolverGrid.for_model(market, ref_internal, dt=solver_dt, q_min=q_min, q_max=q_max)
    ref_surface, _ = solve(market, ref_internal, ref_grid)
    ref_run = run_monte_carlo(
        StationaryStrategy(stationary_policy(ref_surface)), market, ref_internal, config, threads
    )

    rows = []
    for v in values:
        row = {"axis": axis, "value": v, "as_pnl": ref_run.pnl_mean, "as_volume": 0.0}
        if axis == "fee":
            intl = replace(internal, xi=v)
            grid = SolverGrid.for_model(market, intl, dt=solver_dt, q_min=q_min, q_max=q_max)
            surface, _ = solve(market, intl, grid)
            opt = run_monte_carlo(
                StationaryStrategy(stationary_policy(surface)), market, intl, config, threads
            )
            row["optimal_pnl"] = opt.pnl_mean
            row["optimal_volume"] = opt.volume_rate_mean
            naive = naive_policy(
                BenchmarkConfig(iota=0.0, rho_tilde=internal.rho_tilde, reference=ref_surface),
                lbar=internal.lbar,
            )
            nv = run_monte_carlo(StationaryStrategy(naive), market, intl, config, threads)
            row["naive_pnl"] = nv.pnl_mean
            row["naive_volume"] = nv.volume_rate_mean
        else:
            intl = replace(internal, xi=0.0)
            naive = naive_policy(
                BenchmarkConfig(iota=v, rho_tilde=internal.rho_tilde, reference=ref_surface),
                lbar=internal.lbar,
            )
            nv = run_monte_carlo(StationaryStrategy(naive), market, intl, config, threads)
            row["naive_pnl"] = nv.pnl_mean
            row["naive_volume"] = nv.volume_rate_mean
        rows.append(row)
    return rows
