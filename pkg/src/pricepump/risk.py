"""Risk metrics and return statistics.

Two independent hazards are tracked.  The crash hazard is endogenous:
it grows as cash concentrates in a low-cash group of agents, measured by
a Gaussian-kernel concentration of the cash distribution.  The investor
hazard accumulates while the realized market rate runs below the rate
investors were targeting.  Total risk is their sum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class HazardParams:
    """Scales for the hazard metrics.

    cash_scale: dollars^2 kernel width of the cash-concentration measure.
    crash_scale: multiplier of the concentration-driven crash hazard.
    shortfall_scale: per-year multiplier of the investor hazard.
    cap: finite ceiling for the crash hazard (the formula diverges as the
        concentration approaches 1).
    """

    cash_scale: float = 70.0
    crash_scale: float = 5.0
    shortfall_scale: float = 1.0
    cap: float = 1e6

    def __post_init__(self):
        for name in ("cash_scale", "crash_scale", "shortfall_scale", "cap"):
            if getattr(self, name) <= 0.0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")


def cash_concentration(cash_values: Sequence[float] | np.ndarray, cash_scale: float = 70.0) -> float:
    """Concentration of agents at low cash: mean of exp(-cash^2 / scale).

    Lies in (0, 1]; equals 1 exactly when every agent holds zero cash and
    vanishes as all agents become cash-rich.
    """
    if cash_scale <= 0.0:
        raise ValueError(f"cash_scale must be positive, got {cash_scale}")
    values = np.asarray(cash_values, dtype=float)
    if values.size == 0:
        raise ValueError("cash_concentration needs at least one agent")
    return float(np.mean(np.exp(-(values * values) / cash_scale)))


def crash_hazard(concentration: float, params: HazardParams) -> float:
    """Crash hazard from cash concentration: scale * sqrt(h) / (1 - sqrt(h)).

    Strictly increasing in the concentration, zero in the diffuse limit,
    and capped at ``params.cap`` where the expression diverges.
    """
    if not 0.0 < concentration <= 1.0:
        raise ValueError(f"concentration must lie in (0, 1], got {concentration}")
    root = math.sqrt(concentration)
    if root >= 1.0:
        return params.cap
    return min(params.crash_scale * root / (1.0 - root), params.cap)


def underperformance_hazard(
    times: Sequence[float] | np.ndarray,
    rates: Sequence[float] | np.ndarray,
    target_rate: float,
    maturity: float,
    t: float,
    scale: float = 1.0,
    step: float = 1.0 / 360.0,
) -> float:
    """Investor-side risk accumulated from unrealized profit.

    Integrates exp(target_rate - rate(s)) from ``maturity`` to ``t`` with
    the trapezoid rule at spacing ``step``; the sampled rate series is
    interpolated linearly onto that grid.  Zero for t <= maturity, and
    non-decreasing in t.  The series must cover the window without
    internal gaps larger than ``step``.
    """
    if step <= 0.0:
        raise ValueError(f"step must be positive, got {step}")
    if scale <= 0.0:
        raise ValueError(f"scale must be positive, got {scale}")
    if t <= maturity:
        return 0.0
    times = np.asarray(times, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if times.ndim != 1 or times.shape != rates.shape or times.size < 2:
        raise ValueError("rate series must be two equal-length 1-d arrays with >= 2 samples")
    gaps = np.diff(times)
    if np.any(gaps <= 0.0):
        raise ValueError("rate series times must be strictly increasing")
    if times[0] > maturity + 1e-12 or times[-1] < t - 1e-12:
        raise ValueError(
            f"rate series [{times[0]}, {times[-1]}] does not cover the window [{maturity}, {t}]"
        )
    lo = max(int(np.searchsorted(times, maturity, side="right")) - 1, 0)
    hi = min(int(np.searchsorted(times, t, side="left")) + 1, times.size)
    if np.max(np.diff(times[lo:hi])) > step * (1.0 + 1e-9):
        raise ValueError("rate series has a gap larger than the integration step inside the window")

    n_full = int(math.floor((t - maturity) / step + 1e-12))
    grid = maturity + step * np.arange(n_full + 1)
    if grid[-1] < t - 1e-12 * max(1.0, abs(t)):
        grid = np.append(grid, t)
    integrand = np.exp(target_rate - np.interp(grid, times, rates))
    return float(scale * np.trapezoid(integrand, grid))


def total_risk(crash: float, investor: float) -> float:
    """Combined systematic risk: the two hazards are additive."""
    if crash < 0.0 or investor < 0.0:
        raise ValueError(f"hazards must be non-negative, got ({crash}, {investor})")
    return crash + investor


class TheoreticalReturn(NamedTuple):
    daily_factor: float  # geometric-mean gross return per trading day
    volatility: float


def theoretical_return(
    greed: float,
    fear: float,
    n_agents: int,
    n_active: int,
    volatility_coeff: float = 1.0,
) -> TheoreticalReturn:
    """Predicted per-day return of a homogeneous zero-flow market.

    The daily geometric-mean factor is (greed/fear)**(m/(2N)): each day a
    fraction m/N of agents updates its target, and on average half move
    with greed, half with fear.  The volatility scale is
    ``volatility_coeff * (greed*fear - 1)`` with an undetermined positive
    coefficient; it is reported but never drives control flow.
    """
    if greed < 1.0 or fear < 1.0:
        raise ValueError("factors must be >= 1")
    if not 1 <= n_active <= n_agents:
        raise ValueError(f"n_active must be in [1, {n_agents}], got {n_active}")
    exponent = n_active / (2.0 * n_agents)
    return TheoreticalReturn(
        daily_factor=(greed / fear) ** exponent,
        volatility=volatility_coeff * (greed * fear - 1.0),
    )


@dataclass(frozen=True)
class ReturnStats:
    """Per-day moments of a log-return sample."""

    mean_log_return: float
    std_log_return: float
    geometric_mean_return: float
    skewness: float
    excess_kurtosis: float
    n_returns: int


def stats_from_log_returns(log_returns: Sequence[float] | np.ndarray) -> ReturnStats:
    """Moments of a pooled log-return sample (population conventions).

    Degenerate samples (zero variance) report zero shape statistics.
    """
    returns = np.asarray(log_returns, dtype=float)
    if returns.size < 2:
        raise ValueError(f"need at least 2 returns, got {returns.size}")
    mean = float(returns.mean())
    centered = returns - mean
    variance = float(np.mean(centered * centered))
    std = math.sqrt(variance)
    if std > 0.0:
        skewness = float(np.mean(centered**3)) / std**3
        kurtosis = float(np.mean(centered**4)) / std**4 - 3.0
    else:
        skewness = 0.0
        kurtosis = 0.0
    return ReturnStats(
        mean_log_return=mean,
        std_log_return=std,
        geometric_mean_return=math.exp(mean),
        skewness=skewness,
        excess_kurtosis=kurtosis,
        n_returns=int(returns.size),
    )


def return_stats(price_series: Sequence[float] | np.ndarray) -> ReturnStats:
    """Daily log-return statistics of a price series (>= 3 positive prices)."""
    prices = np.asarray(price_series, dtype=float)
    if prices.size < 3:
        raise ValueError(f"need at least 3 prices, got {prices.size}")
    if np.any(prices <= 0.0):
        raise ValueError("prices must be positive")
    return stats_from_log_returns(np.diff(np.log(prices)))
