"""Naive benchmark: reference quotes with the client order pasted into the ask ladder.

The reference is the no-internal-exchange solve (classic multi-size inventory
quoting) evaluated at t=0. When a client sell order of size l rests on the
internal venue, the benchmark inserts a slice of size l at rho_tilde + iota
above mid into the marginal ask ladder and re-quotes each cumulative size at
the volume-weighted average price of the cheapest units of the merged ladder.
Bids are never adjusted. Execution rule: take one unit whenever inventory is
negative and the order is present.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .policy import PolicyDiagnostics, QuoteLadder, StationaryPolicy, depth_planes
from .solver import ValueSurface

__all__ = [
    "BenchmarkConfig",
    "BenchmarkDiagnostics",
    "as_depths",
    "vwap_adjusted_ask",
    "naive_decision",
    "naive_policy",
]


@dataclass
class BenchmarkDiagnostics:
    """Counters for degenerate ladder adjustments (informational, not errors)."""

    insertion_undefined: int = 0  # insertion price at or above every quoted depth
    slice_capped: int = 0  # client size larger than the top ladder size
    marginals_unsorted: int = 0  # ladder with non-ascending marginal prices


@dataclass(frozen=True)
class BenchmarkConfig:
    """Margin, client offset and the disabled-internal reference surface."""

    iota: float
    rho_tilde: float
    reference: ValueSurface

    def __post_init__(self):
        if self.iota < 0:
            raise ValueError("margin iota must be nonnegative")
        if self.reference.internal.enabled:
            raise ValueError("reference surface must be solved with the internal exchange disabled")


def as_depths(reference: ValueSurface, q: int) -> QuoteLadder:
    """Reference bid/ask ladder at t=0 read from the disabled-internal surface."""
    if reference.internal.enabled:
        raise ValueError("reference surface must be solved with the internal exchange disabled")
    g = reference.grid
    qi = g.q_index(q)  # raises off grid
    bid, ask = depth_planes(reference, 0)
    b = tuple(None if np.isnan(v) else float(v) for v in bid[qi, 0])
    a = tuple(None if np.isnan(v) else float(v) for v in ask[qi, 0])
    return QuoteLadder(sizes=tuple(reference.market.sizes), bid=b, ask=a)


def naive_decision(q: int, l: int) -> bool:
    """Take one unit iff the order is present and inventory is negative."""
    return l >= 1 and q < 0


def _quoted_prefix(ladder: QuoteLadder) -> int:
    """Number of leading sizes with a finite ask depth; later sizes stay unquoted."""
    m = 0
    for a in ladder.ask:
        if a is None:
            break
        m += 1
    return m


def vwap_adjusted_ask(
    as_ladder: QuoteLadder,
    l: int,
    rho_tilde: float,
    iota: float,
    diag: BenchmarkDiagnostics | None = None,
) -> QuoteLadder:
    """Ask ladder after inserting a slice of size l at rho_tilde + iota.

    Sizes cheaper than the inserted slice keep their reference depth exactly.
    From the first size whose depth exceeds the insertion price onward, the
    new depth is the VWAP of the cheapest z_j units of the merged ladder:
    the slice plus the reference ladder's marginal chunks in price order.
    Assumes the reference ladder has nondecreasing marginal prices (flagged
    otherwise); if the insertion price is at or above every quoted depth the
    ladder is returned unchanged and flagged.
    """
    if l <= 0:
        return as_ladder
    m = _quoted_prefix(as_ladder)
    if m == 0:
        return as_ladder
    sizes = as_ladder.sizes[:m]
    depths = [float(d) for d in as_ladder.ask[:m]]
    c = rho_tilde + iota

    slice_size = float(l)
    if slice_size > sizes[-1]:
        slice_size = float(sizes[-1])
        if diag is not None:
            diag.slice_capped += 1

    # cumulative cost C at nodes 0 = z_0 < z_1 < ... and chunk marginal prices
    nodes = [0.0] + [float(z) for z in sizes]
    cum = [0.0] + [z * d for z, d in zip(sizes, depths)]
    marg = [(cum[r] - cum[r - 1]) / (nodes[r] - nodes[r - 1]) for r in range(1, len(nodes))]
    if any(a > b for a, b in zip(marg, marg[1:])) and diag is not None:
        diag.marginals_unsorted += 1

    ins = next((j for j, d in enumerate(depths) if c < d), None)
    if ins is None:
        if diag is not None:
            diag.insertion_undefined += 1
        return as_ladder

    def cum_cost(y: float) -> float:
        # ladder-order cumulative cost of the first y units
        for r in range(1, len(nodes)):
            if y <= nodes[r]:
                return cum[r - 1] + (y - nodes[r - 1]) * marg[r - 1]
        return cum[-1]

    below = 0.0  # units of the reference ladder priced strictly under the slice
    for r in range(len(marg)):
        if marg[r] < c:
            below = nodes[r + 1]
        else:
            break

    new_ask = list(as_ladder.ask)
    for j in range(ins, m):
        zj = float(sizes[j])
        if zj <= below:
            continue
        if zj - below <= slice_size:
            new_ask[j] = (cum_cost(below) + (zj - below) * c) / zj
        else:
            new_ask[j] = (slice_size * c + cum_cost(zj - slice_size)) / zj
    return QuoteLadder(sizes=as_ladder.sizes, bid=as_ladder.bid, ask=tuple(new_ask))


def naive_policy(
    config: BenchmarkConfig,
    lbar: int,
    diag: BenchmarkDiagnostics | None = None,
) -> StationaryPolicy:
    """Stationary decision table for the benchmark over liquidity levels 0..lbar."""
    ref = config.reference
    g = ref.grid
    K = len(ref.market.sizes)
    n_l = lbar + 1
    bid = np.full((g.n_q, n_l, K), np.nan)
    ask = np.full((g.n_q, n_l, K), np.nan)
    execute = np.zeros((g.n_q, n_l), dtype=np.bool_)
    for qi in range(g.n_q):
        q = qi + g.q_min
        ladder = as_depths(ref, q)
        base_bid = [np.nan if b is None else b for b in ladder.bid]
        base_ask = [np.nan if a is None else a for a in ladder.ask]
        bid[qi, :, :] = base_bid
        ask[qi, 0, :] = base_ask
        for l in range(1, n_l):
            adj = vwap_adjusted_ask(ladder, l, config.rho_tilde, config.iota, diag)
            ask[qi, l, :] = [np.nan if a is None else a for a in adj.ask]
            execute[qi, l] = naive_decision(q, l)
    return StationaryPolicy(
        sizes=tuple(ref.market.sizes),
        q_min=g.q_min,
        q_max=g.q_max,
        n_l=n_l,
        bid=bid,
        ask=ask,
        execute=execute,
        diagnostics=PolicyDiagnostics(),
    )
