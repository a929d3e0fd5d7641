"""End-to-end experiments: simulated market paths under exogenous
investment flows, Monte Carlo ensembles, flow-regime comparisons, and
calibration of the reduced flow-response model against ensemble output.

The flagship experiment is the investment cycle: a zero-flow warm-up
phase in which the market pumps its price on its own, an investment
phase feeding a dollar schedule into the market, and, once the first
money matures, a withdrawal phase in which investors take out their
tracked withdrawable value at a target rate.  Paths are independent
units of parallel work; all aggregation is order-independent.
"""
from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .engine import trading_session
from .errors import BracketError, ConfigurationError, DivergenceError, PricePumpError
from .market import GreedFearSpec, MarketState, SignalSchedule, default_greed_fear, init_population
from .ponzi import SpeculativePonziParams, speculative_ponzi_solve
from .risk import (
    HazardParams,
    ReturnStats,
    TheoreticalReturn,
    cash_concentration,
    crash_hazard,
    stats_from_log_returns,
    theoretical_return,
)
from .schedules import ScheduleSpec, schedule_eval

HISTOGRAM_BINS = 50


@dataclass(frozen=True)
class MarketParams:
    """Population and engine parameters shared by all experiments."""

    n_agents: int = 500
    n_active: int = 125
    initial_cash: float = 10.0
    initial_ratio: float = 1.0
    stock_noise_range: float = 0.1
    days_per_year: int = 360
    greed_fear: GreedFearSpec = field(default_factory=default_greed_fear)
    signal: SignalSchedule = field(default_factory=SignalSchedule)
    invert_flow_sign: bool = False  # audit switch: flips the sign convention of external flows

    def __post_init__(self):
        if self.n_agents < 1:
            raise ConfigurationError(f"n_agents must be >= 1, got {self.n_agents}")
        if not 1 <= self.n_active <= self.n_agents:
            raise ConfigurationError(
                f"n_active must be in [1, {self.n_agents}], got {self.n_active}"
            )
        if self.initial_cash <= 0.0:
            raise ConfigurationError(f"initial_cash must be positive, got {self.initial_cash}")
        if self.initial_ratio <= 0.0:
            raise ConfigurationError(f"initial_ratio must be positive, got {self.initial_ratio}")
        if self.stock_noise_range < 0.0:
            raise ConfigurationError(
                f"stock_noise_range must be >= 0, got {self.stock_noise_range}"
            )
        if self.days_per_year < 1:
            raise ConfigurationError(f"days_per_year must be >= 1, got {self.days_per_year}")

    def total_initial_cash(self) -> float:
        return self.n_agents * self.initial_cash

    def mean_factors(self) -> tuple[float, float]:
        """Factors at the mean log-levels of the population distribution."""
        gf = self.greed_fear
        return math.exp(gf.mean_log_greed), math.exp(gf.mean_log_fear)

    def theoretical(self, volatility_coeff: float = 1.0) -> TheoreticalReturn:
        greed, fear = self.mean_factors()
        return theoretical_return(greed, fear, self.n_agents, self.n_active, volatility_coeff)

    def annualized_target_rate(self) -> float:
        """Continuous yearly rate matching the predicted daily factor."""
        return self.days_per_year * math.log(self.theoretical().daily_factor)


@dataclass(frozen=True)
class CycleConfig:
    """Three-phase investment-cycle experiment."""

    market: MarketParams = field(default_factory=MarketParams)
    hazard: HazardParams = field(default_factory=HazardParams)
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    pre_phase: float = 3.0
    maturity: float = 3.0
    target_rate: Optional[float] = None  # None: annualized predicted market rate
    horizon: float = 20.0
    n_paths: int = 1000
    base_seed: int = 12345
    checkpoints: Optional[tuple[float, ...]] = None  # None: phase boundaries

    def __post_init__(self):
        if self.pre_phase < 0.0 or self.maturity < 0.0:
            raise ConfigurationError("pre_phase and maturity must be >= 0")
        if self.horizon <= self.pre_phase + self.maturity:
            raise ConfigurationError(
                f"horizon {self.horizon} must exceed pre_phase + maturity "
                f"({self.pre_phase + self.maturity})"
            )
        if self.n_paths < 1:
            raise ConfigurationError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.base_seed < 0:
            raise ConfigurationError(f"base_seed must be >= 0, got {self.base_seed}")

    def resolved_target_rate(self) -> float:
        if self.target_rate is not None:
            return self.target_rate
        return self.market.annualized_target_rate()

    def resolved_checkpoints(self) -> tuple[float, ...]:
        if self.checkpoints is not None:
            return self.checkpoints
        return (self.pre_phase, self.pre_phase + self.maturity, self.horizon)


class CashSnapshot(NamedTuple):
    time: float
    cash: np.ndarray


@dataclass
class PathRecord:
    """Daily series for one simulated path, plus cash snapshots.

    All arrays share the grid ``times`` (day 0 holds the initial state).
    ``flow`` is the external flow actually executed each day.
    """

    times: np.ndarray
    price: np.ndarray
    log_price: np.ndarray
    hazard_crash: np.ndarray
    hazard_investor: np.ndarray
    hazard_total: np.ndarray
    flow: np.ndarray
    withdrawable: np.ndarray
    external_value: np.ndarray
    total_cash: np.ndarray
    snapshots: tuple[CashSnapshot, ...] = ()
    clamp_events: int = 0

    def columns(self) -> dict[str, np.ndarray]:
        """Series keyed by their serialization names."""
        return {
            "price": self.price,
            "log_price": self.log_price,
            "Ha": self.hazard_crash,
            "Hp": self.hazard_investor,
            "H": self.hazard_total,
            "xin": self.flow,
            "R": self.withdrawable,
            "S_ext": self.external_value,
            "total_cash": self.total_cash,
        }


class InvestorLedger:
    """Withdrawable value as investors track it, on the market's clock.

    Per day, the tracked value compounds at the realized market rate
    (annualized simple return), is reduced at the target rate once
    withdrawals are on, and receives the inflow made one maturity ago
    marked to the current price.  Ring buffers hold exactly one maturity
    of price and inflow history.
    """

    def __init__(self, target_rate: float, maturity_days: int, period: float):
        if maturity_days < 0:
            raise ConfigurationError(f"maturity_days must be >= 0, got {maturity_days}")
        if period <= 0.0:
            raise ConfigurationError(f"period must be positive, got {period}")
        self.target_rate = target_rate
        self.maturity_days = maturity_days
        self.period = period
        self.value = 0.0
        self.price_history: deque[float] = deque(maxlen=max(maturity_days, 1))
        self.inflow_history: deque[float] = deque(maxlen=max(maturity_days, 1))

    def record_day(
        self, new_price: float, prev_price: float, gross_inflow: float, withdrawing: bool
    ) -> float:
        """Advance one day; returns the updated withdrawable value."""
        realized = (new_price / prev_price - 1.0) / self.period
        if self.maturity_days == 0:
            matured = gross_inflow
        elif len(self.inflow_history) == self.maturity_days:
            matured = self.inflow_history[0] * new_price / self.price_history[0]
        else:
            matured = 0.0
        drain = self.target_rate if withdrawing else 0.0
        self.value += self.period * (realized - drain) * self.value + matured
        if self.maturity_days > 0:
            self.price_history.append(new_price)
            self.inflow_history.append(gross_inflow)
        return self.value


def _run_days(
    state: MarketState,
    market: MarketParams,
    hazard: HazardParams,
    n_days: int,
    *,
    schedule: Optional[ScheduleSpec] = None,
    pre_phase: float = 0.0,
    maturity: float = 0.0,
    target_rate: float = 0.0,
    constant_flow: float = 0.0,
    checkpoint_days: Sequence[int] = (),
) -> PathRecord:
    """Shared day loop.

    With a schedule, runs the phased investment cycle with an investor
    ledger; otherwise applies a constant external flow and the ledger
    quantities stay identically zero.
    """
    dpy = market.days_per_year
    period = 1.0 / dpy
    cycle_mode = schedule is not None
    invest_day = int(round(pre_phase * dpy))
    withdraw_day = int(round((pre_phase + maturity) * dpy))
    sign = -1.0 if market.invert_flow_sign else 1.0

    times = np.arange(n_days + 1) / dpy
    price = np.empty(n_days + 1)
    hazard_crash = np.empty(n_days + 1)
    hazard_investor = np.zeros(n_days + 1)
    flow = np.zeros(n_days + 1)
    withdrawable = np.zeros(n_days + 1)
    external_value = np.zeros(n_days + 1)
    total_cash = np.empty(n_days + 1)

    price[0] = state.price
    hazard_crash[0] = crash_hazard(cash_concentration(state.cash, hazard.cash_scale), hazard)
    total_cash[0] = state.cash.sum()
    external_value[0] = state.external_shares * state.price

    checkpoint_set = set(int(d) for d in checkpoint_days)
    snapshots: list[CashSnapshot] = []
    if 0 in checkpoint_set:
        snapshots.append(CashSnapshot(0.0, state.cash.copy()))

    ledger = (
        InvestorLedger(target_rate, int(round(maturity * dpy)), period) if cycle_mode else None
    )
    # a zero-mass schedule means no investors, hence no investor-side risk
    hazard_active = cycle_mode and schedule.first_year_total > 0.0
    shortfall_scale = hazard.shortfall_scale
    signal = market.signal
    n_active = market.n_active
    clamp_events = 0
    integrand_prev = 0.0

    for day in range(n_days):
        if cycle_mode:
            gross_inflow = (
                schedule_eval(schedule, (day - invest_day) / dpy) * period
                if day >= invest_day
                else 0.0
            )
            withdrawing = day >= withdraw_day
            requested = gross_inflow - (target_rate * ledger.value * period if withdrawing else 0.0)
        else:
            gross_inflow = 0.0
            withdrawing = False
            requested = constant_flow * period

        state, outcome = trading_session(
            state, n_active, sign * requested, signal, times[day]
        )
        clamp_events += outcome.clamped
        new_price = state.price
        i = day + 1
        price[i] = new_price
        flow[i] = outcome.cash_flow_in
        total_cash[i] = state.cash.sum()
        external_value[i] = state.external_shares * new_price
        hazard_crash[i] = crash_hazard(
            cash_concentration(state.cash, hazard.cash_scale), hazard
        )
        if cycle_mode:
            withdrawable[i] = ledger.record_day(new_price, price[day], gross_inflow, withdrawing)
            if hazard_active and i > withdraw_day:
                integrand = math.exp(target_rate - (new_price / price[day] - 1.0) / period)
                if i - 1 == withdraw_day:
                    integrand_prev = math.exp(
                        target_rate - (price[day] / price[day - 1] - 1.0) / period
                    ) if withdraw_day >= 1 else integrand
                hazard_investor[i] = hazard_investor[i - 1] + shortfall_scale * 0.5 * (
                    integrand_prev + integrand
                ) * period
                integrand_prev = integrand
        if i in checkpoint_set:
            snapshots.append(CashSnapshot(float(times[i]), state.cash.copy()))

    return PathRecord(
        times=times,
        price=price,
        log_price=np.log(price),
        hazard_crash=hazard_crash,
        hazard_investor=hazard_investor,
        hazard_total=hazard_crash + hazard_investor,
        flow=flow,
        withdrawable=withdrawable,
        external_value=external_value,
        total_cash=total_cash,
        snapshots=tuple(snapshots),
        clamp_events=clamp_events,
    )


def _checkpoint_days(checkpoints: Sequence[float], dpy: int, n_days: int) -> list[int]:
    return sorted({min(max(int(round(c * dpy)), 0), n_days) for c in checkpoints})


def run_path(cfg: CycleConfig, path_index: int) -> PathRecord:
    """Simulate one investment-cycle path; fully determined by
    (cfg, path_index)."""
    market = cfg.market
    n_days = int(round(cfg.horizon * market.days_per_year))
    state = init_population(
        market.n_agents,
        market.greed_fear,
        market.initial_cash,
        market.initial_ratio,
        market.stock_noise_range,
        seed=(cfg.base_seed, path_index),
    )
    return _run_days(
        state,
        market,
        cfg.hazard,
        n_days,
        schedule=cfg.schedule,
        pre_phase=cfg.pre_phase,
        maturity=cfg.maturity,
        target_rate=cfg.resolved_target_rate(),
        checkpoint_days=_checkpoint_days(
            cfg.resolved_checkpoints(), market.days_per_year, n_days
        ),
    )


def run_flow_path(
    market: MarketParams,
    hazard: HazardParams,
    flow_rate: float,
    horizon: float,
    base_seed: int,
    path_index: int,
    checkpoints: Sequence[float] = (),
) -> PathRecord:
    """Simulate one path under a constant external flow (dollars per year)."""
    n_days = int(round(horizon * market.days_per_year))
    if n_days < 1:
        raise ConfigurationError(f"horizon {horizon} is below one trading day")
    state = init_population(
        market.n_agents,
        market.greed_fear,
        market.initial_cash,
        market.initial_ratio,
        market.stock_noise_range,
        seed=(base_seed, path_index),
    )
    return _run_days(
        state,
        market,
        hazard,
        n_days,
        constant_flow=flow_rate,
        checkpoint_days=_checkpoint_days(checkpoints, market.days_per_year, n_days),
    )


@dataclass(frozen=True)
class SeriesSummary:
    """Cross-path aggregates of one daily series."""

    mean: np.ndarray
    std: np.ndarray
    p10: np.ndarray
    p50: np.ndarray
    p90: np.ndarray


class CashHistogram(NamedTuple):
    time: float
    bin_edges: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class EnsembleStats:
    """Cross-path aggregates: per-day summary of every tracked series,
    pooled return statistics, merged cash histograms, and counters."""

    times: np.ndarray
    series: dict[str, SeriesSummary]
    pooled_returns: ReturnStats
    histograms: tuple[CashHistogram, ...]
    theoretical: TheoreticalReturn
    n_paths: int
    n_failures: int
    clamp_events: int
    failure_messages: tuple[str, ...] = ()


def _aggregate(records: dict[int, PathRecord], market: MarketParams,
               failures: dict[int, str]) -> EnsembleStats:
    if not records:
        raise PricePumpError(
            "all paths failed: " + "; ".join(list(failures.values())[:3])
        )
    order = sorted(records)
    first = records[order[0]]
    series: dict[str, SeriesSummary] = {}
    for name in first.columns():
        stack = np.stack([records[i].columns()[name] for i in order])
        p10, p50, p90 = np.percentile(stack, [10.0, 50.0, 90.0], axis=0)
        series[name] = SeriesSummary(
            mean=stack.mean(axis=0), std=stack.std(axis=0), p10=p10, p50=p50, p90=p90
        )
    pooled = stats_from_log_returns(
        np.concatenate([np.diff(records[i].log_price) for i in order])
    )
    by_time: dict[float, list[np.ndarray]] = {}
    for i in order:
        for snap in records[i].snapshots:
            by_time.setdefault(snap.time, []).append(snap.cash)
    histograms = []
    for time in sorted(by_time):
        pooled_cash = np.concatenate(by_time[time])
        top = float(pooled_cash.max())
        edges = np.linspace(0.0, top if top > 0.0 else 1.0, HISTOGRAM_BINS + 1)
        counts, edges = np.histogram(pooled_cash, bins=edges)
        histograms.append(CashHistogram(time, edges, counts))
    return EnsembleStats(
        times=first.times,
        series=series,
        pooled_returns=pooled,
        histograms=tuple(histograms),
        theoretical=market.theoretical(),
        n_paths=len(order),
        n_failures=len(failures),
        clamp_events=sum(records[i].clamp_events for i in order),
        failure_messages=tuple(f"path {i}: {failures[i]}" for i in sorted(failures)),
    )


def _collect(worker, indices, n_workers):
    records: dict[int, PathRecord] = {}
    failures: dict[int, str] = {}
    if n_workers <= 1:
        for i in indices:
            try:
                records[i] = worker(i)
            except Exception as exc:  # path errors are reported, not fatal
                failures[i] = repr(exc)
        return records, failures
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        futures = {i: pool.submit(worker, i) for i in indices}
        for i, future in futures.items():
            try:
                records[i] = future.result()
            except Exception as exc:
                failures[i] = repr(exc)
    return records, failures


def run_ensemble(cfg: CycleConfig, n_workers: int = 1) -> EnsembleStats:
    """Run ``cfg.n_paths`` independent cycle paths and aggregate them.

    Aggregates are indexed by path number, so the result is identical for
    any worker count and execution order.
    """
    records, failures = _collect(
        _CyclePathWorker(cfg), range(cfg.n_paths), n_workers
    )
    return _aggregate(records, cfg.market, failures)


def run_flow_ensemble(
    market: MarketParams,
    hazard: HazardParams,
    flow_rate: float,
    horizon: float,
    n_paths: int,
    base_seed: int,
    n_workers: int = 1,
    checkpoints: Sequence[float] = (),
) -> EnsembleStats:
    """Constant-flow ensemble (zero, investment, or withdrawal regimes)."""
    if n_paths < 1:
        raise ConfigurationError(f"n_paths must be >= 1, got {n_paths}")
    records, failures = _collect(
        _FlowPathWorker(market, hazard, flow_rate, horizon, base_seed, tuple(checkpoints)),
        range(n_paths),
        n_workers,
    )
    return _aggregate(records, market, failures)


class _CyclePathWorker:
    def __init__(self, cfg: CycleConfig):
        self.cfg = cfg

    def __call__(self, path_index: int) -> PathRecord:
        return run_path(self.cfg, path_index)


class _FlowPathWorker:
    def __init__(self, market, hazard, flow_rate, horizon, base_seed, checkpoints):
        self.args = (market, hazard, flow_rate, horizon, base_seed)
        self.checkpoints = checkpoints

    def __call__(self, path_index: int) -> PathRecord:
        market, hazard, flow_rate, horizon, base_seed = self.args
        return run_flow_path(
            market, hazard, flow_rate, horizon, base_seed, path_index, self.checkpoints
        )


@dataclass(frozen=True)
class RegimeComparison:
    investment: EnsembleStats
    zero: EnsembleStats
    withdrawal: EnsembleStats
    inflow_rate: float
    outflow_rate: float

    def as_dict(self) -> dict[str, EnsembleStats]:
        return {
            "investment": self.investment,
            "zero": self.zero,
            "withdrawal": self.withdrawal,
        }


def regime_comparison(
    market: MarketParams,
    hazard: HazardParams,
    horizon: float = 2.0,
    n_paths: int = 100,
    base_seed: int = 12345,
    inflow_rate: Optional[float] = None,
    outflow_rate: Optional[float] = None,
    n_workers: int = 1,
) -> RegimeComparison:
    """Three ensembles differing only in the external-flow policy.

    Defaults: inflow equal to the population's initial cash per year,
    outflow a quarter of it per year (stronger withdrawals drain the
    market's cash entirely within the horizon).  Final-day cash
    snapshots are recorded for distribution comparisons.
    """
    total = market.total_initial_cash()
    inflow = inflow_rate if inflow_rate is not None else total
    outflow = outflow_rate if outflow_rate is not None else -0.25 * total
    if inflow <= 0.0 or outflow >= 0.0:
        raise ConfigurationError("inflow_rate must be positive and outflow_rate negative")
    ensembles = {}
    for name, rate in (("investment", inflow), ("zero", 0.0), ("withdrawal", outflow)):
        ensembles[name] = run_flow_ensemble(
            market, hazard, rate, horizon, n_paths, base_seed,
            n_workers=n_workers, checkpoints=(horizon,),
        )
    return RegimeComparison(
        investment=ensembles["investment"],
        zero=ensembles["zero"],
        withdrawal=ensembles["withdrawal"],
        inflow_rate=inflow,
        outflow_rate=outflow,
    )


class CalibrationResult(NamedTuple):
    market_impact: float
    rmse: float


def investment_phase_series(
    times: np.ndarray, values: np.ndarray, pre_phase: float
) -> tuple[np.ndarray, np.ndarray]:
    """Slice a daily series to the investor clock (zero at investment start)."""
    start = int(np.searchsorted(times, pre_phase - 1e-12))
    return times[start:] - times[start], values[start:]


def fit_market_impact(
    times: np.ndarray,
    external_value: np.ndarray,
    schedule: ScheduleSpec,
    target_rate: float,
    maturity: float,
    bracket: tuple[float, float],
    initial_capital: Optional[float] = None,
    tol: float = 1e-3,
) -> CalibrationResult:
    """Calibrate the flow-response coefficient of the speculative scheme.

    Minimizes the RMSE between the scheme's capital trajectory and the
    observed external investment value (both on the investor clock, same
    daily grid) by golden-section search on the log of the coefficient.
    Raises BracketError when the minimum sits at a bracket edge.
    """
    times = np.asarray(times, dtype=float)
    external_value = np.asarray(external_value, dtype=float)
    if times.ndim != 1 or times.shape != external_value.shape or times.size < 3:
        raise ValueError("times and external_value must be equal-length 1-d arrays (>= 3)")
    low, high = bracket
    if not 0.0 < low < high:
        raise ConfigurationError(f"bracket must satisfy 0 < low < high, got ({low}, {high})")
    step = float(times[1] - times[0])
    if not np.allclose(np.diff(times), step, rtol=0.0, atol=1e-9):
        raise ValueError("times must form a uniform grid")
    if abs(times[0]) > 1e-9:
        raise ValueError("series must start at time zero on the investor clock")
    horizon = float(times[-1])
    start_capital = float(external_value[0]) if initial_capital is None else initial_capital
    start_capital = max(start_capital, 0.0)

    def objective(log_impact: float) -> float:
        params = SpeculativePonziParams(
            market_impact=math.exp(log_impact),
            withdrawal_rate=target_rate,
            maturity=maturity,
            initial_capital=start_capital,
        )
        try:
            sol = speculative_ponzi_solve(params, schedule, horizon, step)
        except DivergenceError:
            return math.inf  # blown-up candidates lose to any finite fit
        residual = sol.capital - external_value
        return math.sqrt(float(np.mean(residual * residual)))

    a, b = math.log(low), math.log(high)
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = objective(c), objective(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = objective(d)
    best = 0.5 * (a + b)
    margin = max(tol, 1e-12) * 2.0
    if best - math.log(low) < margin or math.log(high) - best < margin:
        raise BracketError(
            f"fitted coefficient {math.exp(best):.6g} sits at the edge of the "
            f"bracket ({low}, {high}); widen the bracket"
        )
    return CalibrationResult(market_impact=math.exp(best), rmse=objective(best))
