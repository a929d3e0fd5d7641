"""Trader portfolios, market state, and correlated greed/fear sampling.

The market is a population of portfolio-rebalancing traders.  Each agent
holds stock (stored as its dollar value at the current price and revalued
multiplicatively every session), cash, a private target stock-to-cash
ratio, and a pair of multiplicative target-update factors: ``greed``
(applied after selling) and ``fear`` (applied after buying).  Factor
pairs are drawn once per population from a correlated log-normal
distribution restricted to factors >= 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError
from .rng import SeedLike, as_rng

_MAX_REDRAW_ROUNDS = 1000


@dataclass(frozen=True)
class AgentPortfolio:
    """One trader's holdings and behavioral parameters."""

    stock_value: float
    cash: float
    target_ratio: float
    greed: float = 1.0
    fear: float = 1.0

    def __post_init__(self):
        if self.stock_value < 0.0 or self.cash < 0.0:
            raise ValueError(
                f"holdings must be non-negative, got stock={self.stock_value}, cash={self.cash}"
            )
        if self.target_ratio <= 0.0:
            raise ValueError(f"target_ratio must be positive, got {self.target_ratio}")
        if self.greed < 1.0 or self.fear < 1.0:
            raise ValueError(f"greed and fear must be >= 1, got ({self.greed}, {self.fear})")


@dataclass(frozen=True)
class GreedFearSpec:
    """Joint distribution of the log greed/fear factors.

    Both coordinates are normal with a shared variance and the given
    correlation.  Samples with a negative coordinate are redrawn, so
    factors stay >= 1.  The means must sit at least three standard
    deviations above zero, which keeps the redraw probability per sample
    below 0.5% and makes the truncation practically invisible in the
    sample moments.
    """

    mean_log_greed: float
    mean_log_fear: float
    log_variance: float
    correlation: float

    def __post_init__(self):
        if self.log_variance < 0.0:
            raise ConfigurationError(f"log_variance must be >= 0, got {self.log_variance}")
        if not -1.0 <= self.correlation <= 1.0:
            raise ConfigurationError(
                f"correlation must lie in [-1, 1], got {self.correlation}"
            )
        margin = 3.0 * math.sqrt(self.log_variance)
        for name, mean in (("mean_log_greed", self.mean_log_greed),
                           ("mean_log_fear", self.mean_log_fear)):
            if mean - margin < 0.0:
                raise ConfigurationError(
                    f"{name} must be at least three standard deviations above zero "
                    f"(got {mean} with sd {margin / 3.0:.6g})"
                )


def default_greed_fear() -> GreedFearSpec:
    """Reference factor distribution: means ln(1.12)/ln(1.11), shared variance 12e-4, correlation 0.95."""
    return GreedFearSpec(
        mean_log_greed=math.log(1.12),
        mean_log_fear=math.log(1.11),
        log_variance=12e-4,
        correlation=0.95,
    )


@dataclass(frozen=True)
class ConstantSignal:
    """Signal fixed at ``level`` for all times."""

    level: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.level <= 1.0:
            raise ConfigurationError(f"signal level must lie in [0, 1], got {self.level}")

    def __call__(self, t: float) -> float:
        return self.level


@dataclass(frozen=True)
class WindowSignal:
    """Signal at ``level`` for start <= t < end, zero elsewhere."""

    start: float
    end: float
    level: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.level <= 1.0:
            raise ConfigurationError(f"signal level must lie in [0, 1], got {self.level}")

    def __call__(self, t: float) -> float:
        return self.level if self.start <= t < self.end else 0.0


@dataclass(frozen=True)
class SignalSchedule:
    """Time modulation of the population's greed/fear intensity.

    The signal maps time (years) into [0, 1]; at zero signal the
    effective factors are exactly 1 and target ratios never move.  The
    base amplitudes describe the population-level intensity used when a
    homogeneous population is built from a signal specification.
    """

    base_greed_amplitude: float = 0.0
    base_fear_amplitude: float = 0.0
    signal: Callable[[float], float] = ConstantSignal(1.0)

    def __post_init__(self):
        if self.base_greed_amplitude < 0.0 or self.base_fear_amplitude < 0.0:
            raise ConfigurationError("signal amplitudes must be >= 0")


def effective_factors(agent: AgentPortfolio, schedule: SignalSchedule, t: float) -> tuple[float, float]:
    """Agent's greed/fear factors scaled by the signal at time ``t``.

    Returns ``(1 + (greed-1)*signal(t), 1 + (fear-1)*signal(t))``; with
    the default always-on signal this is just ``(greed, fear)``.
    """
    if t < 0.0:
        raise ValueError(f"time must be >= 0, got {t}")
    level = float(schedule.signal(t))
    return (1.0 + (agent.greed - 1.0) * level, 1.0 + (agent.fear - 1.0) * level)


def sample_greed_fear(spec: GreedFearSpec, n: int, rng: SeedLike) -> np.ndarray:
    """Draw ``n`` (greed, fear) factor pairs; returns an (n, 2) array.

    Log-factors are bivariate normal with equal variances; draws with a
    negative log-coordinate are rejected and redrawn.  Identical
    (spec, n, seed) produce identical output.
    """
    if n < 0:
        raise ValueError(f"sample count must be >= 0, got {n}")
    rng = as_rng(rng)
    logs = np.empty((n, 2))
    sd = math.sqrt(spec.log_variance)
    if sd == 0.0:
        logs[:, 0] = spec.mean_log_greed
        logs[:, 1] = spec.mean_log_fear
        return np.exp(logs)
    rho = spec.correlation
    mix = math.sqrt(max(0.0, 1.0 - rho * rho))
    pending = np.arange(n)
    for _ in range(_MAX_REDRAW_ROUNDS):
        if pending.size == 0:
            return np.exp(logs)
        z = rng.standard_normal((pending.size, 2))
        log_greed = spec.mean_log_greed + sd * z[:, 0]
        log_fear = spec.mean_log_fear + sd * (rho * z[:, 0] + mix * z[:, 1])
        logs[pending, 0] = log_greed
        logs[pending, 1] = log_fear
        pending = pending[(log_greed < 0.0) | (log_fear < 0.0)]
    raise RuntimeError("factor sampling failed to converge; check the 3-sigma margin")


@dataclass
class MarketState:
    """Full market: per-agent arrays, prices, and the path's random stream.

    Stock is stored as dollar value at the current price; share counts
    are ``stock_value / price``.  ``external_shares`` tracks the stock
    held by the outside-investor pool, so total shares are conserved
    across sessions.  ``prev_price`` is the price the most recent session
    started from.
    """

    stock_value: np.ndarray
    cash: np.ndarray
    target_ratio: np.ndarray
    greed: np.ndarray
    fear: np.ndarray
    price: float = 1.0
    prev_price: float = 1.0
    day: int = 0
    external_shares: float = 0.0
    rng: np.random.Generator = field(default_factory=np.random.default_rng, repr=False)

    @property
    def n_agents(self) -> int:
        return int(self.stock_value.shape[0])

    @property
    def agents(self) -> tuple[AgentPortfolio, ...]:
        """Materialized per-agent view; O(n), intended for inspection and tests."""
        return tuple(
            AgentPortfolio(float(s), float(b), float(k), float(g), float(f))
            for s, b, k, g, f in zip(
                self.stock_value, self.cash, self.target_ratio, self.greed, self.fear
            )
        )

    def total_cash(self) -> float:
        return float(self.cash.sum())

    def total_shares(self) -> float:
        """Agent shares plus the external pool; invariant across sessions."""
        return float(self.stock_value.sum() / self.price + self.external_shares)

    @classmethod
    def from_agents(
        cls,
        agents: Sequence[AgentPortfolio],
        price: float = 1.0,
        prev_price: float | None = None,
        seed: SeedLike = 0,
    ) -> "MarketState":
        if not agents:
            raise ValueError("a market needs at least one agent")
        if price <= 0.0:
            raise ValueError(f"price must be positive, got {price}")
        return cls(
            stock_value=np.array([a.stock_value for a in agents], dtype=float),
            cash=np.array([a.cash for a in agents], dtype=float),
            target_ratio=np.array([a.target_ratio for a in agents], dtype=float),
            greed=np.array([a.greed for a in agents], dtype=float),
            fear=np.array([a.fear for a in agents], dtype=float),
            price=float(price),
            prev_price=float(prev_price if prev_price is not None else price),
            rng=as_rng(seed),
        )


def init_population(
    n_agents: int,
    greed_fear: GreedFearSpec,
    initial_cash: float = 10.0,
    initial_ratio: float = 1.0,
    stock_noise_range: float = 0.1,
    seed: SeedLike = 0,
) -> MarketState:
    """Build the starting population.

    Every agent holds ``initial_cash`` in cash and
    ``initial_cash * initial_ratio`` plus a uniform perturbation from
    [0, stock_noise_range) in stock; factor pairs come from
    ``greed_fear``.  Prices start at 1 and the external pool is empty.
    The same seed reproduces the population exactly (factor pairs are
    drawn first, stock perturbations second).
    """
    if n_agents < 1:
        raise ConfigurationError(f"population size must be >= 1, got {n_agents}")
    if initial_cash <= 0.0:
        raise ConfigurationError(f"initial_cash must be positive, got {initial_cash}")
    if initial_ratio <= 0.0:
        raise ConfigurationError(f"initial_ratio must be positive, got {initial_ratio}")
    if stock_noise_range < 0.0:
        raise ConfigurationError(f"stock_noise_range must be >= 0, got {stock_noise_range}")
    rng = as_rng(seed)
    pairs = sample_greed_fear(greed_fear, n_agents, rng)
    noise = rng.uniform(0.0, stock_noise_range, n_agents)
    return MarketState(
        stock_value=initial_cash * initial_ratio + noise,
        cash=np.full(n_agents, float(initial_cash)),
        target_ratio=np.full(n_agents, float(initial_ratio)),
        greed=pairs[:, 0].copy(),
        fear=pairs[:, 1].copy(),
        rng=rng,
    )
