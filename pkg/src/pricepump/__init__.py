"""Agent-based speculative-bubble market simulator with scheme-dynamics
ODE benchmarks, risk metrics, Monte Carlo experiment orchestration, and
a command-line interface."""

__version__ = "0.1.0"

from .errors import (
    BracketError,
    ConfigurationError,
    DivergenceError,
    LiquidityExhaustedError,
    NoSupplyError,
    PricePumpError,
)
from .rng import as_rng, make_rng
from .market import (
    AgentPortfolio,
    ConstantSignal,
    GreedFearSpec,
    MarketState,
    SignalSchedule,
    WindowSignal,
    default_greed_fear,
    effective_factors,
    init_population,
    sample_greed_fear,
)
from .engine import (
    PRICE_RATIO_FLOOR,
    SessionOutcome,
    Trade,
    clear_price,
    rebalance,
    trading_session,
    update_ratio,
)
from .risk import (
    HazardParams,
    ReturnStats,
    TheoreticalReturn,
    cash_concentration,
    crash_hazard,
    return_stats,
    stats_from_log_returns,
    theoretical_return,
    total_risk,
    underperformance_hazard,
)
from .schedules import ScheduleSpec, schedule_amplitude, schedule_eval
from .ponzi import (
    OdeSolution,
    PonziParams,
    SpeculativePonziParams,
    SteadyStateRate,
    classical_ponzi_solve,
    collapse_time,
    critical_exponent,
    speculative_ponzi_solve,
    steady_state_rate,
)
from .cycle import (
    CalibrationResult,
    CashHistogram,
    CashSnapshot,
    CycleConfig,
    EnsembleStats,
    InvestorLedger,
    MarketParams,
    PathRecord,
    RegimeComparison,
    SeriesSummary,
    fit_market_impact,
    investment_phase_series,
    regime_comparison,
    run_ensemble,
    run_flow_ensemble,
    run_flow_path,
    run_path,
)
from .config import (
    ExperimentConfig,
    config_hash,
    config_to_dict,
    load_config_data,
    parse_config,
    serialize_config,
)
from .output import emit_series, read_csv_columns, write_manifest

__all__ = [
    "__version__",
    "AgentPortfolio",
    "BracketError",
    "CalibrationResult",
    "CashHistogram",
    "CashSnapshot",
    "ConfigurationError",
    "ConstantSignal",
    "CycleConfig",
    "DivergenceError",
    "EnsembleStats",
    "ExperimentConfig",
    "GreedFearSpec",
    "HazardParams",
    "InvestorLedger",
    "LiquidityExhaustedError",
    "MarketParams",
    "MarketState",
    "NoSupplyError",
    "OdeSolution",
    "PathRecord",
    "PonziParams",
    "PricePumpError",
    "PRICE_RATIO_FLOOR",
    "RegimeComparison",
    "ReturnStats",
    "ScheduleSpec",
    "SeriesSummary",
    "SessionOutcome",
    "SignalSchedule",
    "SpeculativePonziParams",
    "SteadyStateRate",
    "TheoreticalReturn",
    "Trade",
    "WindowSignal",
    "as_rng",
    "cash_concentration",
    "classical_ponzi_solve",
    "clear_price",
    "collapse_time",
    "config_hash",
    "config_to_dict",
    "crash_hazard",
    "critical_exponent",
    "default_greed_fear",
    "effective_factors",
    "emit_series",
    "fit_market_impact",
    "init_population",
    "investment_phase_series",
    "load_config_data",
    "make_rng",
    "parse_config",
    "read_csv_columns",
    "rebalance",
    "regime_comparison",
    "return_stats",
    "run_ensemble",
    "run_flow_ensemble",
    "run_flow_path",
    "run_path",
    "sample_greed_fear",
    "schedule_amplitude",
    "schedule_eval",
    "serialize_config",
    "speculative_ponzi_solve",
    "stats_from_log_returns",
    "steady_state_rate",
    "theoretical_return",
    "total_risk",
    "trading_session",
    "underperformance_hazard",
    "update_ratio",
    "write_manifest",
]
