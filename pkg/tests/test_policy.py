import pytest

from ixmm.params import ScenarioName, calibrated_market_params, scenario_preset
from ixmm.policy import PolicyDiagnostics, decide, depth_planes, stationary_policy
from ixmm.solver import SolverGrid, solve


@pytest.fixture(scope="module")
def fa_surface():
    market = calibrated_market_params()
    internal = scenario_preset(ScenarioName.FULL_AMOUNT, 0.0, 0.0)
    grid = SolverGrid.for_model(market, internal, dt=0.01)
    surface, region = solve(market, internal, grid)
    return surface, region


class TestDecide:
    def test_twap_executes_when_short(self, twap_surface):
        surface, _ = twap_surface
        assert decide(surface, 0.0, -1, 1).execute_now

    def test_iceberg_holds_at_flat(self, iceberg_surface):
        surface, _ = iceberg_surface
        assert not decide(surface, 0.0, 0, 1).execute_now

    def test_never_executes_without_liquidity(self, iceberg_surface):
        surface, _ = iceberg_surface
        for q in (-5, 0, 5):
            assert not decide(surface, 0.0, q, 0).execute_now

    def test_deterministic(self, iceberg_surface):
        surface, _ = iceberg_surface
        a = decide(surface, 123.4, 3, 1)
        b = decide(surface, 123.4, 3, 1)
        assert a == b

    def test_ladder_has_every_size(self, iceberg_surface):
        surface, _ = iceberg_surface
        ladder = decide(surface, 0.0, 0, 1).ladder
        assert ladder.sizes == (1, 5, 10)
        assert all(v is not None for v in ladder.bid + ladder.ask)

    def test_unquoted_sizes_near_boundary(self, iceberg_surface):
        surface, _ = iceberg_surface
        ladder = decide(surface, 0.0, 25, 1).ladder
        assert ladder.bid_for(10) is None  # destination 35 leaves the grid
        assert ladder.ask_for(10) is not None

    def test_off_grid_q_clamps_and_counts(self, iceberg_surface):
        surface, _ = iceberg_surface
        diag = PolicyDiagnostics()
        d = decide(surface, 0.0, 99, 1, diagnostics=diag)
        assert diag.clamp_count == 1
        assert d == decide(surface, 0.0, 30, 1)

    def test_time_lookup_uses_earlier_level(self, iceberg_surface):
        surface, _ = iceberg_surface
        dt = surface.grid.dt
        a = decide(surface, 10 * dt, 0, 1)
        b = decide(surface, 10 * dt + 0.4 * dt, 0, 1)
        assert a == b


class TestStationaryPolicy:
    def test_matches_decide_at_t0_everywhere(self, twap_surface):
        surface, _ = twap_surface
        pol = stationary_policy(surface)
        g = surface.grid
        for q in range(g.q_min, g.q_max + 1, 7):
            for l in range(g.n_l):
                assert pol.decide(q, l) == decide(surface, 0.0, q, l)

    def test_full_amount_frozen_policy(self, fa_surface):
        surface, _ = fa_surface
        pol = stationary_policy(surface)
        # execute everywhere well below the threshold, never above it, any l >= 1
        for l in range(1, 11):
            for q in range(surface.grid.q_min, 3):
                assert pol.decide(q, l).execute_now
            for q in range(5, surface.grid.q_max):
                assert not pol.decide(q, l).execute_now

    def test_disabled_internal_never_executes(self, ref_surface):
        pol = stationary_policy(ref_surface)
        assert not pol.execute.any()

    def test_execute_implies_liquidity(self, fa_surface):
        surface, _ = fa_surface
        pol = stationary_policy(surface)
        assert not pol.execute[:, 0].any()

    def test_chain_terminates_within_bound(self, fa_surface):
        surface, region = fa_surface
        pol = stationary_policy(surface)
        internal = surface.internal
        q, l = surface.grid.q_min, internal.lbar
        qstar = region.boundary(0, internal.lbar)
        steps = 0
        while pol.decide(q, l).execute_now and l >= 1:
            q += 1
            l -= 1
            if l == 0:  # worst case: replenishment succeeds every time
                l = internal.lbar
            steps += 1
            assert steps <= internal.lbar + (qstar - surface.grid.q_min) + 1
        assert not pol.decide(q, l).execute_now

    def test_csv_export_roundtrip(self, twap_surface, tmp_path):
        surface, _ = twap_surface
        pol = stationary_policy(surface)
        path = tmp_path / "policy.csv"
        pol.to_csv(path, header_comment="units=price-units")
        lines = path.read_text().splitlines()
        assert lines[0].startswith("#")
        header = lines[1].split(",")
        assert header[:2] == ["q", "l"]
        assert "execute" in header
        n_q = surface.grid.q_max - surface.grid.q_min + 1
        assert len(lines) == 2 + n_q * surface.grid.n_l


class TestSkewNearBoundary:
    def test_iceberg_ask_depths_tighter_with_order(self, iceberg_surface, ref_surface):
        """Near the execution threshold the dealer undercuts its no-order asks."""
        surface, region = iceberg_surface
        qstar = region.boundary(0, 1)
        q = qstar + 1
        qi = surface.grid.q_index(q)
        with_bid, with_ask = depth_planes(surface, 0)
        ref_bid, ref_ask = depth_planes(ref_surface, 0)
        for k in range(3):
            assert with_ask[qi, 1, k] <= ref_ask[qi, 0, k] + 1e-12
