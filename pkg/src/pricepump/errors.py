"""Exception types shared across the package."""
from __future__ import annotations


class PricePumpError(Exception):
    """Base class for all package-specific failures."""


class ConfigurationError(PricePumpError, ValueError):
    """A parameter or configuration file violates a documented constraint."""


class NoSupplyError(PricePumpError):
    """Price clearing is impossible because no active agent holds any stock."""


class LiquidityExhaustedError(PricePumpError):
    """The requested external flow would drive the clearing price to zero or below."""

    def __init__(self, flow: float, message: str | None = None):
        self.flow = flow
        super().__init__(message or f"external flow {flow} exhausts market liquidity")


class DivergenceError(PricePumpError):
    """An integration produced a non-finite state."""

    def __init__(self, last_time: float, message: str | None = None):
        self.last_time = last_time
        super().__init__(message or f"solution became non-finite after t={last_time:.6g}")


class BracketError(PricePumpError):
    """A bracketing search was started on an interval that does not bracket the target."""
