import json

import numpy as np
import pytest

from ixmm.params import (
    InternalOrderParams,
    MarketParams,
    ScenarioName,
    calibrated_market_params,
    scenario_preset,
)
from ixmm.policy import StationaryPolicy, stationary_policy
from ixmm.simulator import (
    SimConfig,
    StationaryStrategy,
    SurfaceStrategy,
    run_monte_carlo,
    simulate_path,
    sweep,
    write_path_records,
)
from ixmm.solver import SolverGrid, solve


def flat_policy(q_min=-5, q_max=5, n_l=1, sizes=(1,)):
    """Quotes nothing, never executes."""
    n_q = q_max - q_min + 1
    K = len(sizes)
    return StationaryPolicy(
        sizes=tuple(sizes),
        q_min=q_min,
        q_max=q_max,
        n_l=n_l,
        bid=np.full((n_q, n_l, K), np.nan),
        ask=np.full((n_q, n_l, K), np.nan),
        execute=np.zeros((n_q, n_l), dtype=bool),
    )


def quiet_market(horizon=3.0):
    return MarketParams(
        sigma=0.0, sizes=(1,), lambda_bid={1: 1e-300}, lambda_ask={1: 1e-300},
        kappa={1: 1.0}, alpha=0.0, phi=0.0, psi=0.0, horizon=horizon,
    )


class TestDegenerateDynamics:
    def test_nothing_happens_without_randomness(self):
        mk = quiet_market()
        cfg = SimConfig(dt=0.5, horizon=3.0, n_paths=4, seed=1, q0=2, x0=1.5, s0=50.0)
        stats = run_monte_carlo(
            StationaryStrategy(flat_policy()), mk, InternalOrderParams.disabled(), cfg,
            record_paths=True,
        )
        assert np.all(stats.paths.pnl == 1.5 + 2 * 50.0)
        assert np.all(stats.paths.volume_rate == 0.0)
        assert np.all(np.isnan(stats.paths.first_fill))
        assert stats.fill_fraction == 0.0

    def test_single_path_flat_strategy_zero_pnl(self):
        mk = quiet_market()
        cfg = SimConfig(dt=0.5, horizon=3.0, n_paths=1, seed=3, q0=0, x0=0.0)
        stats = run_monte_carlo(
            StationaryStrategy(flat_policy()), mk, InternalOrderParams.disabled(), cfg
        )
        assert stats.pnl_mean == 0.0
        assert stats.objective_mean == 0.0

    def test_certain_cancellation(self):
        mk = quiet_market(horizon=1.0)
        intl = InternalOrderParams(lbar=1, nu=2.0, mu=0.0, p=0.0)  # nu*dt = 1
        cfg = SimConfig(dt=0.5, horizon=1.0, n_paths=8, seed=2, l0=1)
        # order gone after the first step, so the psi penalty accrues exactly once
        mk_pen = type(mk).from_dict({**mk.to_dict(), "psi": 1.0})
        stats_pen = run_monte_carlo(
            StationaryStrategy(flat_policy(n_l=2)), mk_pen, intl, cfg, record_paths=True
        )
        assert np.all(stats_pen.paths.objective == -0.5)

    def test_certain_arrival_and_take(self):
        mk = quiet_market(horizon=1.0)
        intl = InternalOrderParams(lbar=1, nu=0.0, mu=2.0, p=0.0, rho_tilde=-0.3)
        pol = flat_policy(n_l=2)
        pol.execute[:, 1] = True  # always take when the order is present
        cfg = SimConfig(dt=0.5, horizon=1.0, n_paths=3, seed=4, l0=0, s0=10.0)
        stats = run_monte_carlo(StationaryStrategy(pol), mk, intl, cfg, record_paths=True)
        # arrival at step 0 events, take at step 1: pays S + rho = 9.7
        assert np.all(stats.paths.first_fill == 0.5)
        assert np.all(stats.paths.volume_rate == 1.0 / 1.0)
        assert np.all(stats.paths.pnl == pytest.approx(-9.7 + 10.0))


@pytest.fixture(scope="module")
def setup(iceberg_surface):
    surface, _ = iceberg_surface
    mk = calibrated_market_params()
    intl = scenario_preset(ScenarioName.ICEBERG, 0.0, 0.0)
    strategy = StationaryStrategy(stationary_policy(surface))
    return strategy, mk, intl


@pytest.fixture(scope="module")
def fa():
    mk = calibrated_market_params()
    intl = scenario_preset(ScenarioName.FULL_AMOUNT, 0.0, 0.0)
    grid = SolverGrid.for_model(mk, intl, dt=0.01)
    surface, _ = solve(mk, intl, grid)
    return surface, mk, intl


@pytest.fixture(scope="module")
def small_setup():
    mk = type(calibrated_market_params()).from_dict({**calibrated_market_params().to_dict(), "horizon": 30.0})
    intl = scenario_preset(ScenarioName.ICEBERG, 0.0, 0.0)
    cfg = SimConfig(dt=0.3, horizon=30.0, n_paths=300, seed=31)
    return mk, intl, cfg


class TestDeterminism:
    def test_same_seed_bit_identical(self, setup):
        strategy, mk, intl = setup
        cfg = SimConfig(dt=0.3, horizon=300.0, n_paths=300, seed=42)
        a = run_monte_carlo(strategy, mk, intl, cfg, record_paths=True)
        b = run_monte_carlo(strategy, mk, intl, cfg, record_paths=True)
        assert a.to_dict() == b.to_dict()
        np.testing.assert_array_equal(a.paths.pnl, b.paths.pnl)

    def test_thread_count_invariant(self, setup):
        strategy, mk, intl = setup
        cfg = SimConfig(dt=0.3, horizon=300.0, n_paths=2100, seed=42)
        a = run_monte_carlo(strategy, mk, intl, cfg, threads=1)
        b = run_monte_carlo(strategy, mk, intl, cfg, threads=3)
        assert a.to_dict() == b.to_dict()

    def test_different_seeds_differ(self, setup):
        strategy, mk, intl = setup
        a = run_monte_carlo(strategy, mk, intl, SimConfig(dt=0.3, horizon=300.0, n_paths=50, seed=1))
        b = run_monte_carlo(strategy, mk, intl, SimConfig(dt=0.3, horizon=300.0, n_paths=50, seed=2))
        assert a.pnl_mean != b.pnl_mean


class TestAccounting:
    def test_event_log_replays_cash_and_inventory(self, iceberg_surface):
        surface, _ = iceberg_surface
        mk = calibrated_market_params()
        intl = scenario_preset(ScenarioName.ICEBERG, 0.1, 0.04)
        strategy = StationaryStrategy(stationary_policy(surface))
        cfg = SimConfig(dt=0.3, horizon=300.0, n_paths=24, seed=11, s0=100.0)
        stats = run_monte_carlo(strategy, mk, intl, cfg, record_paths=True, log_events=True)
        total_takes = 0
        for k, events in enumerate(stats.paths.events):
            x, q = cfg.x0, cfg.q0
            takes = 0
            first = None
            for step, kind, dq, cash in events:
                x += cash
                q += dq
                if kind == "take":
                    takes += 1
                    if first is None:
                        first = step * cfg.dt
            assert x == stats.paths.final_x[k]  # exact: same floats in same order
            assert q == stats.paths.final_q[k]
            assert stats.paths.pnl[k] == x + q * stats.paths.final_s[k]
            if first is None:
                assert np.isnan(stats.paths.first_fill[k])
            else:
                assert stats.paths.first_fill[k] == first
            assert takes == stats.paths.volume_rate[k] * cfg.horizon
            total_takes += takes
        assert total_takes > 0

    def test_liquidity_replay_stays_in_bounds(self, iceberg_surface):
        surface, _ = iceberg_surface
        mk = calibrated_market_params()
        intl = scenario_preset(ScenarioName.ICEBERG, 0.0, 0.0)
        strategy = StationaryStrategy(stationary_policy(surface))
        cfg = SimConfig(dt=0.3, horizon=300.0, n_paths=64, seed=13)
        stats = run_monte_carlo(strategy, mk, intl, cfg, record_paths=True, log_events=True)
        transitions = {"cancel": 0, "arrive": lambda l: intl.lbar, "replenish": lambda l: intl.lbar}
        saw_take = saw_order_event = False
        for events in stats.paths.events:
            l = intl.lbar
            for step, kind, dq, cash in events:
                if kind == "take":
                    assert l >= 1  # takes only with liquidity present
                    l -= 1
                    saw_take = True
                elif kind == "cancel":
                    l = 0
                    saw_order_event = True
                elif kind in ("arrive", "replenish"):
                    l = intl.lbar
                    saw_order_event = True
                assert 0 <= l <= intl.lbar
        assert saw_take and saw_order_event
        assert stats.clamp_count == 0
        assert stats.valid


class TestReferenceEngine:
    """The plain single-path step engine and the vectorized engine must agree
    bitwise: same substreams, same arithmetic, same event logs."""

    def test_vectorized_matches_reference_bitwise(self, iceberg_surface):
        surface, _ = iceberg_surface
        mk = calibrated_market_params()
        intl = scenario_preset(ScenarioName.ICEBERG, -0.1, 0.02)
        strategy = StationaryStrategy(stationary_policy(surface))
        cfg = SimConfig(dt=0.3, horizon=300.0, n_paths=6, seed=77)
        bulk = run_monte_carlo(strategy, mk, intl, cfg, record_paths=True, log_events=True)
        for k in range(cfg.n_paths):
            _, one = simulate_path(strategy, mk, intl, cfg, k, log_events=True)
            assert one.pnl[0] == bulk.paths.pnl[k]
            assert one.objective[0] == bulk.paths.objective[k]
            assert one.final_x[0] == bulk.paths.final_x[k]
            assert one.final_q[0] == bulk.paths.final_q[k]
            assert one.final_s[0] == bulk.paths.final_s[k]
            ff_a, ff_b = one.first_fill[0], bulk.paths.first_fill[k]
            assert (np.isnan(ff_a) and np.isnan(ff_b)) or ff_a == ff_b
            assert one.volume_rate[0] == bulk.paths.volume_rate[k]
            assert one.events[0] == bulk.paths.events[k]

    def test_reference_matches_full_amount_chains(self):
        mk = calibrated_market_params()
        intl = scenario_preset(ScenarioName.FULL_AMOUNT, 0.0, 0.0)
        grid = SolverGrid.for_model(mk, intl, dt=0.01)
        surface, _ = solve(mk, intl, grid)
        strategy = StationaryStrategy(stationary_policy(surface))
        cfg = SimConfig(dt=0.3, horizon=300.0, n_paths=3, seed=5)
        bulk = run_monte_carlo(strategy, mk, intl, cfg, record_paths=True)
        for k in range(cfg.n_paths):
            state, one = simulate_path(strategy, mk, intl, cfg, k)
            assert one.first_fill[0] == 0.0  # five takes chained at t=0
            assert one.pnl[0] == bulk.paths.pnl[k]
            assert 0 <= state.l <= intl.lbar


class TestRecordOutputs:
    def test_path_records_csv_and_summary_json(self, iceberg_surface, tmp_path):
        surface, _ = iceberg_surface
        mk = calibrated_market_params()
        intl = scenario_preset(ScenarioName.ICEBERG, 0.0, 0.0)
        strategy = StationaryStrategy(stationary_policy(surface))
        cfg = SimConfig(dt=0.3, horizon=300.0, n_paths=16, seed=3)
        stats = run_monte_carlo(strategy, mk, intl, cfg, record_paths=True)
        out = write_path_records(stats.paths, tmp_path / "paths.csv", header_comment="units=price-units")
        lines = out.read_text().splitlines()
        assert lines[1].split(",")[0] == "path"
        assert len(lines) == 2 + cfg.n_paths
        summary = json.loads(stats.to_json())
        assert summary["n_paths"] == 16
        assert summary["valid"] is True


class TestSigmaIndependence:
    def test_mean_pnl_within_noise_of_sigma(self, iceberg_surface):
        surface, _ = iceberg_surface
        intl = scenario_preset(ScenarioName.ICEBERG, 0.0, 0.0)
        strategy = StationaryStrategy(stationary_policy(surface))
        base = SimConfig(dt=0.3, horizon=300.0, n_paths=1200, seed=17, sigma=1.0)
        doubled = SimConfig(dt=0.3, horizon=300.0, n_paths=1200, seed=17, sigma=2.0)
        mk = calibrated_market_params()
        a = run_monte_carlo(strategy, mk, intl, base, record_paths=True)
        b = run_monte_carlo(strategy, mk, intl, doubled, record_paths=True)
        # identical fills and takes: sigma only scales the mark-to-market noise
        np.testing.assert_array_equal(a.paths.volume_rate, b.paths.volume_rate)
        diff = b.paths.pnl - a.paths.pnl
        se = diff.std(ddof=1) / np.sqrt(diff.size)
        assert abs(diff.mean()) <= 3 * se


class TestValueConsistency:
    def test_iceberg_objective_matches_solver_value(self, iceberg_surface):
        surface, _ = iceberg_surface
        mk = calibrated_market_params()
        intl = scenario_preset(ScenarioName.ICEBERG, 0.0, 0.0)
        cfg = SimConfig(dt=0.3, horizon=300.0, n_paths=1500, seed=19)
        stats = run_monte_carlo(SurfaceStrategy(surface), mk, intl, cfg)
        h0 = surface.value(0, 0, 1)
        assert abs(stats.objective_mean - h0) <= 3 * stats.objective_se


class TestFullAmountImmediateFill:
    def test_first_fill_always_zero(self, fa):
        surface, mk, intl = fa
        strategy = StationaryStrategy(stationary_policy(surface))
        cfg = SimConfig(dt=0.3, horizon=300.0, n_paths=200, seed=23)
        stats = run_monte_carlo(strategy, mk, intl, cfg, record_paths=True)
        assert np.all(stats.paths.first_fill == 0.0)
        assert stats.fill_fraction == 1.0


class TestConfigValidation:
    def test_thinning_guard(self):
        mk = MarketParams(
            sigma=1.0, sizes=(1,), lambda_bid={1: 3.0}, lambda_ask={1: 3.0},
            kappa={1: 1.0}, alpha=0.0, phi=0.0, psi=0.0, horizon=10.0,
        )
        cfg = SimConfig(dt=0.3, horizon=10.0, n_paths=1, seed=1)
        with pytest.raises(ValueError):
            run_monte_carlo(
                StationaryStrategy(flat_policy()), mk, InternalOrderParams.disabled(), cfg
            )

    def test_dt_must_divide_horizon(self):
        with pytest.raises(ValueError):
            SimConfig(dt=0.7, horizon=10.0, n_paths=1, seed=1).n_steps()

    def test_bad_initial_liquidity(self, iceberg_surface):
        surface, _ = iceberg_surface
        mk = calibrated_market_params()
        intl = scenario_preset(ScenarioName.ICEBERG, 0.0, 0.0)
        cfg = SimConfig(dt=0.3, horizon=300.0, n_paths=1, seed=1, l0=5)
        with pytest.raises(ValueError):
            run_monte_carlo(StationaryStrategy(stationary_policy(surface)), mk, intl, cfg)


class TestSweep:
    def test_fee_rows_structure(self, small_setup):
        mk, intl, cfg = small_setup
        rows = sweep(mk, intl, cfg, "fee", [0.0, 0.1], solver_dt=0.02, q_min=-12, q_max=12)
        assert [r["value"] for r in rows] == [0.0, 0.1]
        for r in rows:
            assert {"optimal_pnl", "optimal_volume", "naive_pnl", "naive_volume", "as_pnl"} <= set(r)

    def test_naive_pnl_strictly_increasing_in_fee(self, small_setup):
        # fee does not change naive quotes, only the take price: pathwise monotone
        mk, intl, cfg = small_setup
        rows = sweep(mk, intl, cfg, "fee", [0.0, 0.05, 0.1], solver_dt=0.02, q_min=-12, q_max=12)
        pnls = [r["naive_pnl"] for r in rows]
        assert pnls[0] < pnls[1] < pnls[2]

    def test_margin_rows(self, small_setup):
        mk, intl, cfg = small_setup
        rows = sweep(mk, intl, cfg, "margin", [0.0, 0.1], solver_dt=0.02, q_min=-12, q_max=12)
        assert all("optimal_pnl" not in r for r in rows)
        assert all(r["naive_volume"] >= 0 for r in rows)

    def test_unknown_axis(self, small_setup):
        mk, intl, cfg = small_setup
        with pytest.raises(ValueError):
            sweep(mk, intl, cfg, "size", [1.0])
