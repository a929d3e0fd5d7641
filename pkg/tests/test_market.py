import math

import numpy as np
import pytest

from pricepump import (
    AgentPortfolio,
    ConfigurationError,
    ConstantSignal,
    GreedFearSpec,
    MarketState,
    SignalSchedule,
    WindowSignal,
    default_greed_fear,
    effective_factors,
    init_population,
    make_rng,
    sample_greed_fear,
)


class TestAgentPortfolio:
    def test_valid(self):
        a = AgentPortfolio(10.0, 10.0, 1.0, 1.12, 1.11)
        assert a.stock_value == 10.0 and a.greed == 1.12

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(stock_value=-1.0, cash=1.0, target_ratio=1.0),
            dict(stock_value=1.0, cash=-1.0, target_ratio=1.0),
            dict(stock_value=1.0, cash=1.0, target_ratio=0.0),
            dict(stock_value=1.0, cash=1.0, target_ratio=1.0, greed=0.9),
            dict(stock_value=1.0, cash=1.0, target_ratio=1.0, fear=0.5),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            AgentPortfolio(**kwargs)


class TestGreedFearSpec:
    def test_correlation_out_of_range(self):
        with pytest.raises(ConfigurationError) as err:
            GreedFearSpec(0.1, 0.1, 0.0, 1.5)
        assert "correlation" in str(err.value) and "[-1, 1]" in str(err.value)

    def test_three_sigma_margin_enforced(self):
        # sd = 0.04 -> margin 0.12 > 0.1
        with pytest.raises(ConfigurationError):
            GreedFearSpec(0.1, 0.1, 0.0016, 0.5)

    def test_negative_variance(self):
        with pytest.raises(ConfigurationError):
            GreedFearSpec(0.1, 0.1, -1e-4, 0.5)

    def test_default_is_valid(self):
        spec = default_greed_fear()
        assert spec.mean_log_greed == pytest.approx(math.log(1.12))
        assert spec.mean_log_fear == pytest.approx(math.log(1.11))
        assert spec.log_variance == 12e-4
        assert spec.correlation == 0.95


class TestSampleGreedFear:
    def test_degenerate_variance(self):
        spec = GreedFearSpec(math.log(1.12), math.log(1.11), 0.0, 0.0)
        pairs = sample_greed_fear(spec, 50, make_rng(1))
        assert np.allclose(pairs[:, 0], 1.12) and np.allclose(pairs[:, 1], 1.11)

    def test_perfect_correlation_is_exact(self):
        # the same normal draw drives both coordinates; recovering the logs
        # from the returned factors costs one exp/log round trip
        spec = GreedFearSpec(0.2, 0.15, 1e-3, 1.0)
        pairs = sample_greed_fear(spec, 2000, make_rng(2))
        logs = np.log(pairs)
        assert np.allclose(logs[:, 0] - 0.2, logs[:, 1] - 0.15, rtol=0.0, atol=1e-12)

    def test_moments_converge(self):
        pairs = sample_greed_fear(default_greed_fear(), 100_000, make_rng(123))
        logs = np.log(pairs)
        corr = np.corrcoef(logs[:, 0], logs[:, 1])[0, 1]
        assert abs(corr - 0.95) < 0.01
        for column in (0, 1):
            assert logs[:, column].var() == pytest.approx(12e-4, rel=0.10)

    def test_factors_at_least_one(self):
        pairs = sample_greed_fear(default_greed_fear(), 100_000, make_rng(5))
        assert (pairs >= 1.0).all()

    def test_rejection_rate_is_small(self):
        # raw draw at the reference moments lands outside the admissible
        # quadrant with probability well under the 0.5% design bound
        rng = np.random.default_rng(9)
        z = rng.standard_normal((200_000, 2))
        sd = math.sqrt(12e-4)
        rho = 0.95
        lg = math.log(1.12) + sd * z[:, 0]
        lf = math.log(1.11) + sd * (rho * z[:, 0] + math.sqrt(1 - rho**2) * z[:, 1])
        assert ((lg < 0) | (lf < 0)).mean() < 0.005

    def test_deterministic_given_seed(self):
        a = sample_greed_fear(default_greed_fear(), 1000, make_rng(77))
        b = sample_greed_fear(default_greed_fear(), 1000, make_rng(77))
        assert np.array_equal(a, b)


class TestEffectiveFactors:
    def test_signal_off(self):
        agent = AgentPortfolio(10, 10, 1, greed=1.12, fear=1.11)
        sched = SignalSchedule(signal=ConstantSignal(0.0))
        assert effective_factors(agent, sched, 1.0) == (1.0, 1.0)

    def test_signal_identity(self):
        agent = AgentPortfolio(10, 10, 1, greed=1.12, fear=1.11)
        sched = SignalSchedule()
        assert effective_factors(agent, sched, 0.5) == (1.12, 1.11)

    def test_signal_interpolates(self):
        agent = AgentPortfolio(10, 10, 1, greed=1.12, fear=1.11)
        sched = SignalSchedule(signal=ConstantSignal(0.5))
        greed, fear = effective_factors(agent, sched, 0.0)
        assert greed == pytest.approx(1.06)
        assert fear == pytest.approx(1.055)

    def test_monotone_in_signal(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            agent = AgentPortfolio(
                1.0, 1.0, 1.0,
                greed=1.0 + rng.uniform(0, 0.5), fear=1.0 + rng.uniform(0, 0.5),
            )
            lo, hi = sorted(rng.uniform(0.0, 1.0, size=2))
            g_lo, f_lo = effective_factors(agent, SignalSchedule(signal=ConstantSignal(lo)), 0.0)
            g_hi, f_hi = effective_factors(agent, SignalSchedule(signal=ConstantSignal(hi)), 0.0)
            assert g_hi >= g_lo >= 1.0
            assert f_hi >= f_lo >= 1.0

    def test_window_signal(self):
        agent = AgentPortfolio(10, 10, 1, greed=1.2, fear=1.1)
        sched = SignalSchedule(signal=WindowSignal(start=1.0, end=2.0))
        assert effective_factors(agent, sched, 0.5) == (1.0, 1.0)
        assert effective_factors(agent, sched, 1.5) == (1.2, 1.1)

    def test_negative_time_rejected(self):
        agent = AgentPortfolio(10, 10, 1)
        with pytest.raises(ValueError):
            effective_factors(agent, SignalSchedule(), -1.0)


class TestInitPopulation:
    def test_reference_population(self):
        state = init_population(500, default_greed_fear(), 10.0, 1.0, 0.1, seed=42)
        assert state.n_agents == 500
        assert np.all(state.cash == 10.0)
        assert np.all(state.stock_value >= 10.0) and np.all(state.stock_value <= 10.1)
        assert state.price == 1.0 and state.prev_price == 1.0
        assert state.external_shares == 0.0 and state.day == 0

    def test_zero_noise_single_agent(self):
        state = init_population(1, default_greed_fear(), 10.0, 2.0, 0.0, seed=1)
        assert state.stock_value[0] == 20.0

    def test_seed_determinism(self):
        a = init_population(100, default_greed_fear(), seed=42)
        b = init_population(100, default_greed_fear(), seed=42)
        c = init_population(100, default_greed_fear(), seed=43)
        assert np.array_equal(a.stock_value, b.stock_value)
        assert np.array_equal(a.greed, b.greed)
        assert not np.array_equal(a.stock_value, c.stock_value)

    def test_invalid_inputs(self):
        with pytest.raises(ConfigurationError):
            init_population(0, default_greed_fear())
        with pytest.raises(ConfigurationError):
            init_population(10, default_greed_fear(), initial_cash=0.0)


class TestMarketState:
    def test_from_agents_round_trip(self):
        agents = (
            AgentPortfolio(10.0, 5.0, 2.0, 1.1, 1.05),
            AgentPortfolio(3.0, 7.0, 0.5, 1.2, 1.2),
        )
        state = MarketState.from_agents(agents, price=2.0)
        assert state.agents == agents
        assert state.total_cash() == 12.0
        assert state.total_shares() == pytest.approx(6.5)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            MarketState.from_agents([])
