"""Ponzi-scheme dynamics: a promised-rate (classical) scheme and a
self-organized speculative scheme whose rate responds to net flow.

Both are integrated with fixed-step classical Runge-Kutta.  The
maturing-inflow forcing switches on discontinuously at the maturity lag,
which the grid is required to hit exactly (maturity must be an integer
multiple of the step); stage evaluations at a switch point use one-sided
values so the integrator keeps full order across it.  The speculative
scheme is a delay system: the growth of maturing money is read from the
stored running integral of the nominal rate, linearly interpolated at
half-steps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import BracketError, ConfigurationError, DivergenceError
from .schedules import ScheduleSpec, schedule_eval

DEFAULT_STEP = 1.0 / 360.0


@dataclass(frozen=True)
class PonziParams:
    """Classical scheme rates (per year) and timing.

    nominal_rate: growth of money already inside the scheme.
    promised_rate: return promised to investors over the maturity period.
    withdrawal_rate: rate at which matured value is withdrawn.
    maturity: years between investing and withdrawal eligibility.
    initial_capital: money in the scheme at t = 0.
    """

    nominal_rate: float = 0.0
    promised_rate: float = 0.41
    withdrawal_rate: float = 0.41
    maturity: float = 3.0
    initial_capital: float = 0.0

    def __post_init__(self):
        if self.maturity < 0.0:
            raise ConfigurationError(f"maturity must be >= 0, got {self.maturity}")
        if self.initial_capital < 0.0:
            raise ConfigurationError(
                f"initial_capital must be >= 0, got {self.initial_capital}"
            )


@dataclass(frozen=True)
class SpeculativePonziParams:
    """Self-organized scheme: the nominal rate is market_impact times the
    net dollar flow (inflow minus withdrawals), plus an optional external
    baseline rate.

    ``literal_rate_coupling`` switches the rate law to respond to the raw
    withdrawable value instead of the withdrawal flow (an audit variant;
    the default law matches the flow term driving capital growth).
    """

    market_impact: float
    withdrawal_rate: float = 0.41
    maturity: float = 3.0
    initial_capital: float = 0.0
    external_rate: float = 0.0
    literal_rate_coupling: bool = False

    def __post_init__(self):
        if self.market_impact <= 0.0:
            raise ConfigurationError(f"market_impact must be positive, got {self.market_impact}")
        if self.maturity < 0.0:
            raise ConfigurationError(f"maturity must be >= 0, got {self.maturity}")
        if self.initial_capital < 0.0:
            raise ConfigurationError(
                f"initial_capital must be >= 0, got {self.initial_capital}"
            )


@dataclass(frozen=True)
class OdeSolution:
    """Uniform-grid solution: capital S(t), withdrawable value R(t), and,
    for the speculative scheme, the nominal rate and its running integral."""

    grid: np.ndarray
    capital: np.ndarray
    withdrawable: np.ndarray
    nominal_rate: Optional[np.ndarray] = None
    log_growth: Optional[np.ndarray] = None

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])


def _grid_steps(horizon: float, step: float) -> int:
    if step <= 0.0:
        raise ConfigurationError(f"step must be positive, got {step}")
    if horizon <= 0.0:
        raise ConfigurationError(f"horizon must be positive, got {horizon}")
    n = int(round(horizon / step))
    if n < 1 or abs(n * step - horizon) > 1e-9 * max(1.0, horizon):
        raise ConfigurationError(
            f"horizon {horizon} must be an integer multiple of the step {step}"
        )
    return n


def _delay_steps(maturity: float, step: float) -> int:
    lag = int(round(maturity / step))
    if abs(lag * step - maturity) > 1e-9 * max(1.0, maturity):
        raise ConfigurationError(
            f"maturity {maturity} must be an integer multiple of the step {step}"
        )
    return lag


def _schedule_stage_values(spec: ScheduleSpec, nodes: np.ndarray, step: float, shift: float):
    """Schedule samples at nodes (both one-sided limits) and midpoints.

    ``shift`` displaces the argument, so the same helper serves the direct
    term r(t) and the delayed term r(t - maturity).  The left-limit array
    is zero at the exact switch-on point; midpoints never hit it.
    Returned as plain lists: the integration loops run on Python floats.
    """
    args = nodes - shift
    right = schedule_eval(spec, args)
    left = np.where(args > 0.0, right, 0.0)
    mid = schedule_eval(spec, args[:-1] + 0.5 * step)
    return right.tolist(), left.tolist(), mid.tolist()


def classical_ponzi_solve(
    params: PonziParams,
    schedule: ScheduleSpec,
    horizon: float,
    step: float = DEFAULT_STEP,
) -> OdeSolution:
    """Integrate the classical scheme.

    Capital grows at the nominal rate plus the net flow (schedule inflow
    minus withdrawals); the withdrawable value compounds at the promised
    rate net of withdrawals and is fed by inflows made one maturity ago,
    grown by the promised rate over the maturity period.  The system is
    linear, so no blow-up occurs at practical horizons.
    """
    n = _grid_steps(horizon, step)
    _delay_steps(params.maturity, step)
    nodes = step * np.arange(n + 1)
    direct_r, _, direct_m = _schedule_stage_values(schedule, nodes, step, 0.0)
    delayed_r, delayed_l, delayed_m = _schedule_stage_values(
        schedule, nodes, step, params.maturity
    )

    rn, rw = params.nominal_rate, params.withdrawal_rate
    drift = params.promised_rate - rw
    matured_gain = math.exp(params.promised_rate * params.maturity)

    capital = np.empty(n + 1)
    withdrawable = np.empty(n + 1)
    s = params.initial_capital
    r = 0.0
    capital[0] = s
    withdrawable[0] = r
    half = 0.5 * step
    sixth = step / 6.0
    for i in range(n):
        f1s = rn * s + direct_r[i] - rw * r
        f1r = drift * r + matured_gain * delayed_r[i]
        s2 = s + half * f1s
        r2 = r + half * f1r
        f2s = rn * s2 + direct_m[i] - rw * r2
        f2r = drift * r2 + matured_gain * delayed_m[i]
        s3 = s + half * f2s
        r3 = r + half * f2r
        f3s = rn * s3 + direct_m[i] - rw * r3
        f3r = drift * r3 + matured_gain * delayed_m[i]
        s4 = s + step * f3s
        r4 = r + step * f3r
        f4s = rn * s4 + direct_r[i + 1] - rw * r4
        f4r = drift * r4 + matured_gain * delayed_l[i + 1]
        s += sixth * (f1s + 2.0 * (f2s + f3s) + f4s)
        r += sixth * (f1r + 2.0 * (f2r + f3r) + f4r)
        capital[i + 1] = s
        withdrawable[i + 1] = r
    return OdeSolution(grid=nodes, capital=capital, withdrawable=withdrawable)


def speculative_ponzi_solve(
    params: SpeculativePonziParams,
    schedule: ScheduleSpec,
    horizon: float,
    step: float = DEFAULT_STEP,
) -> OdeSolution:
    """Integrate the speculative scheme with state (S, R, J).

    J is the running integral of the nominal rate; money invested one
    maturity ago matures grown by exp(J(t) - J(t - maturity)), with the
    past J read from the stored grid (linear interpolation at
    half-steps; J = 0 for t <= 0).
    """
    n = _grid_steps(horizon, step)
    lag = _delay_steps(params.maturity, step)
    nodes = step * np.arange(n + 1)
    direct_r, _, direct_m = _schedule_stage_values(schedule, nodes, step, 0.0)
    delayed_r, delayed_l, delayed_m = _schedule_stage_values(
        schedule, nodes, step, params.maturity
    )

    c0 = params.market_impact
    rw = params.withdrawal_rate
    ext = params.external_rate
    literal = params.literal_rate_coupling

    capital = np.empty(n + 1)
    withdrawable = np.empty(n + 1)
    log_growth = np.zeros(n + 1)
    s = params.initial_capital
    r = 0.0
    j = 0.0
    capital[0] = s
    withdrawable[0] = r

    def past(idx: int) -> float:
        return log_growth[idx] if idx > 0 else 0.0

    half = 0.5 * step
    sixth = step / 6.0
    for i in range(n):
        if lag == 0:
            j1 = jm = j4 = None  # delay vanishes; growth factor is 1
        else:
            j1 = past(i - lag)
            jm = 0.5 * (past(i - lag) + past(i - lag + 1))
            j4 = past(i + 1 - lag)

        def rhs(flow_rate, matured_rate, j_past, s_, r_, j_):
            flow = flow_rate - rw * r_
            rate = c0 * ((flow_rate - r_) if literal else flow) + ext
            growth = 1.0 if j_past is None else math.exp(j_ - j_past)
            ds = flow * (c0 * s_ + 1.0)
            dr = (rate - rw) * r_ + matured_rate * growth
            return ds, dr, rate

        try:
            f1s, f1r, f1j = rhs(direct_r[i], delayed_r[i], j1, s, r, j)
            f2s, f2r, f2j = rhs(
                direct_m[i], delayed_m[i], jm, s + half * f1s, r + half * f1r, j + half * f1j
            )
            f3s, f3r, f3j = rhs(
                direct_m[i], delayed_m[i], jm, s + half * f2s, r + half * f2r, j + half * f2j
            )
            f4s, f4r, f4j = rhs(
                direct_r[i + 1], delayed_l[i + 1], j4,
                s + step * f3s, r + step * f3r, j + step * f3j,
            )
        except OverflowError:
            raise DivergenceError(float(nodes[i])) from None
        s += sixth * (f1s + 2.0 * (f2s + f3s) + f4s)
        r += sixth * (f1r + 2.0 * (f2r + f3r) + f4r)
        j += sixth * (f1j + 2.0 * (f2j + f3j) + f4j)
        if not (math.isfinite(s) and math.isfinite(r) and math.isfinite(j)):
            raise DivergenceError(float(nodes[i]))
        capital[i + 1] = s
        withdrawable[i + 1] = r
        log_growth[i + 1] = j

    inflow_nodes = np.asarray(direct_r)
    if literal:
        rate_series = c0 * (inflow_nodes - withdrawable) + ext
    else:
        rate_series = c0 * (inflow_nodes - rw * withdrawable) + ext
    return OdeSolution(
        grid=nodes,
        capital=capital,
        withdrawable=withdrawable,
        nominal_rate=rate_series,
        log_growth=log_growth,
    )


def collapse_time(sol: OdeSolution) -> Optional[float]:
    """First time the capital crosses zero from above, linearly interpolated.

    Returns None when capital stays positive on the whole grid.  A run
    whose capital starts at zero counts as collapsed only after it has
    been positive, except in the degenerate case where it never is.
    """
    capital = sol.capital
    if not np.any(capital <= 0.0):
        return None
    crossings = np.flatnonzero((capital[1:] <= 0.0) & (capital[:-1] > 0.0))
    if crossings.size == 0:
        if capital[0] <= 0.0 and np.max(capital) <= 0.0:
            return float(sol.grid[0])
        return None
    i = int(crossings[0]) + 1
    before, after = capital[i - 1], capital[i]
    t0, t1 = sol.grid[i - 1], sol.grid[i]
    return float(t0 + (t1 - t0) * before / (before - after))


def critical_exponent(
    params: PonziParams,
    horizon: float,
    tol: float,
    bracket: tuple[float, float] | None = None,
    step: float = DEFAULT_STEP,
) -> float:
    """Smallest exponential-schedule growth rate that keeps the scheme solvent.

    Valid for the flat-market regime (zero nominal rate, withdrawal rate
    equal to the promised rate), where viability flips at a single growth
    rate: the schedule exp(a*t) is run through the classical solver and
    the rate is bisected to within ``tol``.
    """
    if tol <= 0.0:
        raise ConfigurationError(f"tol must be positive, got {tol}")
    if params.nominal_rate != 0.0 or params.promised_rate != params.withdrawal_rate:
        raise ConfigurationError(
            "critical exponent search requires zero nominal rate and "
            "withdrawal rate equal to the promised rate"
        )
    promised = params.promised_rate
    if promised <= 0.0:
        raise ConfigurationError(f"promised_rate must be positive, got {promised}")
    low, high = bracket if bracket is not None else (0.25 * promised, 2.0 * promised)
    if not 0.0 < low < high:
        raise ConfigurationError(f"invalid bracket ({low}, {high})")

    def survives(a: float) -> bool:
        # first_year_total chosen so the schedule is exactly exp(a*t)
        spec = ScheduleSpec(
            kind="exponential",
            first_year_total=math.expm1(a) / a if a != 0.0 else 1.0,
            growth=a,
        )
        return collapse_time(classical_ponzi_solve(params, spec, horizon, step)) is None

    low_ok = survives(low)
    high_ok = survives(high)
    if low_ok or not high_ok:
        raise BracketError(
            f"bracket ({low}, {high}) does not straddle the critical growth rate: "
            f"low endpoint {'survives' if low_ok else 'collapses'}, "
            f"high endpoint {'survives' if high_ok else 'collapses'}"
        )
    while high - low > tol:
        mid = 0.5 * (low + high)
        if survives(mid):
            high = mid
        else:
            low = mid
    return 0.5 * (low + high)


class SteadyStateRate(NamedTuple):
    rate: float
    spread: float  # max - min over the window; convergence diagnostic


def steady_state_rate(sol: OdeSolution, window: float) -> SteadyStateRate:
    """Mean nominal rate over the final ``window`` years, with its spread."""
    if sol.nominal_rate is None:
        raise ValueError("solution carries no nominal-rate series")
    if window <= 0.0:
        raise ValueError(f"window must be positive, got {window}")
    span = float(sol.grid[-1] - sol.grid[0])
    if span < 2.0 * window:
        raise ValueError(f"horizon {span} must be at least twice the window {window}")
    tail = sol.nominal_rate[sol.grid >= sol.grid[-1] - window - 1e-12]
    return SteadyStateRate(rate=float(tail.mean()), spread=float(tail.max() - tail.min()))
