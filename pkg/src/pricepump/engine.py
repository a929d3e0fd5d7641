"""One trading session: price clearing, rebalancing, and target updates.

Each session draws a random subset of "active" agents who set the new
price.  An active agent trades the dollar amount that restores its
portfolio to its private stock-to-cash target at the new price; the
price is the unique level at which those trades absorb the exogenous
cash flow exactly.  After trading, each active agent compares how its
pre-trade portfolio performed against its target and scales the target
up by its greed factor (it sold) or down by its fear factor (it bought).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, LiquidityExhaustedError, NoSupplyError
from .market import AgentPortfolio, MarketState, SignalSchedule

# Sessions never clear below this fraction of the prior price; withdrawals
# that would do so are clamped and flagged instead of annihilating the price.
PRICE_RATIO_FLOOR = 0.01

# Relative tolerance for the "portfolio exactly on target" (no-update) branch.
RATIO_TIE_RTOL = 1e-12


class Trade(NamedTuple):
    index: int
    dollars: float  # > 0: the agent bought stock; < 0: sold
    side: str


@dataclass(frozen=True)
class SessionOutcome:
    """Result of one clearing.

    ``trade_amounts[i]`` is the dollar amount agent ``active_indices[i]``
    moved into stock; the amounts sum to ``-cash_flow_in``.
    ``cash_flow_in`` is the external flow actually executed, which
    differs from the request only when the liquidity clamp fired.
    """

    new_price: float
    active_indices: np.ndarray
    trade_amounts: np.ndarray
    external_share_delta: float
    cash_flow_in: float
    clamped: bool = False

    @property
    def trades(self) -> tuple[Trade, ...]:
        out = []
        for i, x in zip(self.active_indices, self.trade_amounts):
            side = "bought" if x > 0.0 else ("sold" if x < 0.0 else "neutral")
            out.append(Trade(int(i), float(x), side))
        return tuple(out)


def clear_price(
    active: Sequence[AgentPortfolio], prev_price: float, external_flow: float = 0.0
) -> float:
    """Price ratio (new/old) that clears the active agents' net demand.

    With per-agent weights 1/(1+k), the ratio is
    (external_flow + sum k*cash*w) / (sum stock*w): the level at which
    every active agent's target-restoring trade is funded exactly by the
    other agents plus the external flow.
    """
    if prev_price <= 0.0:
        raise ValueError(f"prev_price must be positive, got {prev_price}")
    if not math.isfinite(external_flow):
        raise ValueError(f"external_flow must be finite, got {external_flow}")
    if len(active) == 0:
        raise NoSupplyError("no active agents")
    stock = np.array([a.stock_value for a in active], dtype=float)
    cash = np.array([a.cash for a in active], dtype=float)
    ratio_target = np.array([a.target_ratio for a in active], dtype=float)
    weight = 1.0 / (1.0 + ratio_target)
    demand = float(np.dot(ratio_target * cash, weight))
    supply = float(np.dot(stock, weight))
    if supply == 0.0:
        raise NoSupplyError("all active stock values are zero")
    ratio = (external_flow + demand) / supply
    if ratio <= 0.0:
        raise LiquidityExhaustedError(external_flow)
    return ratio


def rebalance(agent: AgentPortfolio, price_ratio: float) -> tuple[AgentPortfolio, float]:
    """Trade back to the target ratio at the new price.

    Returns the updated portfolio and the dollar amount moved into stock,
    x = (k*cash - ratio*stock) / (1 + k).  The post-trade stock-to-cash
    ratio equals the target exactly, and both balances stay positive.
    """
    if price_ratio <= 0.0:
        raise ValueError(f"price_ratio must be positive, got {price_ratio}")
    k = agent.target_ratio
    x = (k * agent.cash - price_ratio * agent.stock_value) / (1.0 + k)
    new_cash = agent.cash - x
    return replace(agent, stock_value=k * new_cash, cash=new_cash), float(x)


def update_ratio(
    agent: AgentPortfolio,
    price_ratio: float,
    effective_greed: float,
    effective_fear: float,
) -> float:
    """Adaptive target update from pre-trade holdings valued at the new price.

    Over-performing portfolios (value ratio above target, i.e. the agent
    sold) scale the target by greed; under-performing ones (the agent
    bought) divide it by fear; an on-target portfolio keeps it.  A
    zero-cash agent counts as over-performing.
    """
    if price_ratio <= 0.0:
        raise ValueError(f"price_ratio must be positive, got {price_ratio}")
    if effective_greed < 1.0 or effective_fear < 1.0:
        raise ValueError("effective factors must be >= 1")
    k = agent.target_ratio
    lhs = price_ratio * agent.stock_value
    rhs = k * agent.cash
    tolerance = RATIO_TIE_RTOL * rhs
    if agent.cash == 0.0 or lhs > rhs + tolerance:
        return k * effective_greed
    if lhs < rhs - tolerance:
        return k / effective_fear
    return k


def trading_session(
    state: MarketState,
    n_active: int,
    external_flow: float = 0.0,
    signal: SignalSchedule | None = None,
    t: float = 0.0,
) -> tuple[MarketState, SessionOutcome]:
    """Run one session in place and return the (mutated) state and outcome.

    Draws ``n_active`` distinct agents uniformly, clears the price,
    rebalances the active agents, revalues everyone's stock, updates the
    active agents' targets (using signal-scaled factors when ``signal``
    is given), and books the external flow into the outside-investor
    share pool.  A flow so negative that the price would hit zero is
    clamped to keep the price ratio at ``PRICE_RATIO_FLOOR`` and the
    outcome is flagged.
    """
    n = state.n_agents
    if not 1 <= n_active <= n:
        raise ConfigurationError(f"n_active must be in [1, {n}], got {n_active}")
    if not math.isfinite(external_flow):
        raise ValueError(f"external_flow must be finite, got {external_flow}")

    active = state.rng.choice(n, size=n_active, replace=False)
    stock = state.stock_value[active]
    cash = state.cash[active]
    target = state.target_ratio[active]
    weight = 1.0 / (1.0 + target)

    demand = float(np.dot(target * cash, weight))
    supply = float(np.dot(stock, weight))
    if supply == 0.0:
        raise NoSupplyError("all active stock values are zero")
    ratio = (external_flow + demand) / supply
    clamped = False
    if ratio <= 0.0:
        external_flow = PRICE_RATIO_FLOOR * supply - demand
        ratio = PRICE_RATIO_FLOOR
        clamped = True

    trades = (target * cash - ratio * stock) * weight

    # target update compares pre-trade holdings at the new price; done on
    # products to avoid dividing by zero-cash agents (who count as sellers)
    if signal is None:
        greed = state.greed[active]
        fear = state.fear[active]
    else:
        level = float(signal.signal(t))
        greed = 1.0 + (state.greed[active] - 1.0) * level
        fear = 1.0 + (state.fear[active] - 1.0) * level
    lhs = ratio * stock
    rhs = target * cash
    tolerance = RATIO_TIE_RTOL * rhs
    sold = (lhs > rhs + tolerance) | (cash == 0.0)
    bought = lhs < rhs - tolerance
    new_target = np.where(sold, target * greed, np.where(bought, target / fear, target))

    state.stock_value *= ratio
    new_cash = cash - trades
    state.cash[active] = new_cash
    state.stock_value[active] = target * new_cash
    state.target_ratio[active] = new_target

    new_price = ratio * state.price
    state.prev_price = state.price
    state.price = new_price
    share_delta = external_flow / new_price
    state.external_shares += share_delta
    state.day += 1

    outcome = SessionOutcome(
        new_price=new_price,
        active_indices=active,
        trade_amounts=trades,
        external_share_delta=share_delta,
        cash_flow_in=float(external_flow),
        clamped=clamped,
    )
    return state, outcome
