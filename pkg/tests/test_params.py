import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ixmm.params import (
    InternalOrderParams,
    MarketParams,
    ScenarioName,
    effective_offset,
    fill_intensity,
    calibrated_market_params,
    scenario_preset,
)


_MARKET = calibrated_market_params()  # immutable; shared by the hypothesis properties


@pytest.fixture
def market():
    return calibrated_market_params()


class TestFillIntensity:
    def test_zero_depth_returns_base_rate(self, market):
        assert fill_intensity("bid", 1, 0.0, market) == 0.2

    def test_unit_depth(self, market):
        assert fill_intensity("ask", 1, 1.0, market) == pytest.approx(0.2 * math.exp(-1.5), rel=1e-12)
        assert fill_intensity("ask", 1, 1.0, market) == pytest.approx(0.044626, abs=1e-6)

    def test_large_size(self, market):
        assert fill_intensity("bid", 10, 2.0, market) == pytest.approx(0.001 * math.exp(-1.0), rel=1e-12)
        assert fill_intensity("bid", 10, 2.0, market) == pytest.approx(0.000367879, abs=1e-9)

    def test_unknown_size_raises(self, market):
        with pytest.raises(ValueError):
            fill_intensity("bid", 3, 0.5, market)

    def test_unknown_side_raises(self, market):
        with pytest.raises(ValueError):
            fill_intensity("mid", 1, 0.5, market)

    @given(
        d1=st.floats(-5, 5),
        d2=st.floats(-5, 5),
        size=st.sampled_from([1, 5, 10]),
    )
    def test_strictly_decreasing_in_depth(self, d1, d2, size):
        # separations below float granularity of exp() tie, so require a gap
        if abs(d1 - d2) < 1e-9:
            return
        lo, hi = sorted([d1, d2])
        assert fill_intensity("bid", size, lo, _MARKET) > fill_intensity("bid", size, hi, _MARKET)

    @given(delta=st.floats(-5, 5), size=st.sampled_from([1, 5, 10]))
    def test_one_over_kappa_shift_divides_by_e(self, delta, size):
        shifted = fill_intensity("ask", size, delta + 1.0 / _MARKET.kappa[size], _MARKET)
        assert shifted == pytest.approx(fill_intensity("ask", size, delta, _MARKET) / math.e, rel=1e-12)

    @given(delta=st.floats(-10, 50), size=st.sampled_from([1, 5, 10]))
    def test_positive_for_finite_depth(self, delta, size):
        assert fill_intensity("bid", size, delta, _MARKET) > 0


class TestEffectiveOffset:
    @pytest.mark.parametrize(
        "rho_tilde,xi,expected",
        [(0.2, 0.0, 0.2), (0.0, 0.1, -0.1), (-0.2, 0.05, -0.25)],
    )
    def test_examples(self, rho_tilde, xi, expected):
        p = InternalOrderParams(lbar=1, rho_tilde=rho_tilde, xi=xi)
        assert effective_offset(p) == pytest.approx(expected, abs=1e-15)


class TestScenarioPresets:
    def test_iceberg(self):
        p = scenario_preset(ScenarioName.ICEBERG, 0.0, 0.0)
        assert (p.lbar, p.nu, p.mu, p.p) == (1, 0.001, 0.0, 0.9)
        assert (p.rho_tilde, p.xi) == (0.0, 0.0)

    def test_twap(self):
        p = scenario_preset(ScenarioName.TWAP, 0.2, 0.0)
        assert (p.lbar, p.nu, p.mu, p.p) == (1, 0.001, 0.05, 0.0)
        assert p.rho_tilde == 0.2

    def test_full_amount(self):
        p = scenario_preset(ScenarioName.FULL_AMOUNT, -0.2, 0.0)
        assert (p.lbar, p.nu, p.mu, p.p) == (10, 0.001, 0.0, 0.0)
        assert p.rho_tilde == -0.2

    def test_pure(self):
        a = scenario_preset(ScenarioName.TWAP, 0.1, 0.05)
        b = scenario_preset(ScenarioName.TWAP, 0.1, 0.05)
        assert a == b

    def test_parse_aliases(self):
        assert ScenarioName.parse("Full Amount") is ScenarioName.FULL_AMOUNT
        assert ScenarioName.parse("fa") is ScenarioName.FULL_AMOUNT
        assert ScenarioName.parse("TWAP") is ScenarioName.TWAP
        with pytest.raises(ValueError):
            ScenarioName.parse("vwap")


class TestCalibratedMarketParams:
    def test_values(self, market):
        assert market.sizes == (1, 5, 10)
        assert market.kappa[5] == 1.0
        assert market.lambda_bid[10] == 0.001
        assert market.lambda_ask[1] == 0.2
        assert market.alpha == 0.001 and market.phi == 0.001
        assert market.psi == 0.01
        assert market.horizon == 300.0

    def test_sigma_override(self):
        assert calibrated_market_params(sigma=2.5).sigma == 2.5


class TestValidation:
    def test_sizes_must_increase(self):
        with pytest.raises(ValueError):
            MarketParams(
                sigma=1.0, sizes=(5, 1), lambda_bid={5: 0.1, 1: 0.1},
                lambda_ask={5: 0.1, 1: 0.1}, kappa={5: 1.0, 1: 1.0},
                alpha=0.0, phi=0.0, psi=0.0, horizon=1.0,
            )

    def test_intensities_positive(self):
        with pytest.raises(ValueError):
            MarketParams(
                sigma=1.0, sizes=(1,), lambda_bid={1: 0.0}, lambda_ask={1: 0.1},
                kappa={1: 1.0}, alpha=0.0, phi=0.0, psi=0.0, horizon=1.0,
            )

    def test_negative_penalty_rejected(self):
        with pytest.raises(ValueError):
            MarketParams(
                sigma=1.0, sizes=(1,), lambda_bid={1: 0.1}, lambda_ask={1: 0.1},
                kappa={1: 1.0}, alpha=-0.1, phi=0.0, psi=0.0, horizon=1.0,
            )

    def test_internal_order_validation(self):
        with pytest.raises(ValueError):
            InternalOrderParams(lbar=0)
        with pytest.raises(ValueError):
            InternalOrderParams(lbar=1, p=1.5)
        with pytest.raises(ValueError):
            InternalOrderParams(lbar=1, xi=-0.1)

    def test_disabled_is_distinct(self):
        p = InternalOrderParams.disabled()
        assert not p.enabled
        assert InternalOrderParams(lbar=1).enabled

    def test_roundtrip_dicts(self, market):
        assert MarketParams.from_dict(market.to_dict()) == market
        p = scenario_preset(ScenarioName.ICEBERG, 0.1, 0.2)
        assert InternalOrderParams.from_dict(p.to_dict()) == p
