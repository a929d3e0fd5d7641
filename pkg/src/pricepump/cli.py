"""Command-line entry points.

One verb per experiment: ``simulate`` (constant-flow market ensemble),
``regimes`` (investment / zero / withdrawal comparison), ``cycle`` (full
investment cycle), ``ponzi`` (either scheme's trajectory), ``fit-c0``
(calibrate the flow-response coefficient against ensemble output), and
``stats`` (return statistics of a stored price series).  All verbs read
a JSON configuration (optional; defaults are complete), write CSV/JSON
into the output directory, and exit 0 on success.  Failures print a
machine-readable JSON error record to stderr and exit non-zero.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path


from .config import (
    ExperimentConfig,
    config_hash,
    load_config_data,
    parse_config,
    serialize_config,
)
from .cycle import (
    CycleConfig,
    fit_market_impact,
    investment_phase_series,
    regime_comparison,
    run_ensemble,
    run_flow_ensemble,
)
from .errors import ConfigurationError, PricePumpError
from .output import emit_series, read_csv_columns, write_manifest
from .ponzi import (
    PonziParams,
    SpeculativePonziParams,
    classical_ponzi_solve,
    collapse_time,
    speculative_ponzi_solve,
    steady_state_rate,
)
from .risk import return_stats

_VERB_KINDS = {
    "simulate": "aspp",
    "regimes": "regimes",
    "cycle": "cycle",
    "ponzi": "ponzi-classical",
    "fit-c0": "fit-c0",
    "stats": "stats",
}


def _load(args) -> ExperimentConfig:
    default_kind = _VERB_KINDS[args.verb]
    if args.config:
        # the ponzi verb accepts either scheme kind
        if args.verb == "ponzi":
            cfg = parse_config(args.config)
            if not cfg.kind.startswith("ponzi"):
                raise ConfigurationError(
                    f"configuration kind {cfg.kind!r} is not a ponzi experiment"
                )
        else:
            cfg = parse_config(args.config, default_kind=default_kind)
    else:
        cfg = load_config_data({"kind": default_kind})
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    return Path(args.out or cfg.out or "out")


def _override_paths(block, n_paths):
    return dataclasses.replace(block, n_paths=n_paths) if n_paths is not None else block


def _write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _cmd_simulate(args) -> int:
    cfg = _load(args)
    block = _override_paths(cfg.aspp, args.paths)
    ens = run_flow_ensemble(
        cfg.market,
        cfg.hazard,
        block.flow_rate,
        block.horizon,
        block.n_paths,
        cfg.seed,
        n_workers=args.threads,
        checkpoints=(block.horizon,),
    )
    out = _out_dir(args, cfg)
    emit_series(ens, out)
    write_manifest(
        out,
        config_hash(cfg),
        cfg.seed,
        {"clamp_events": ens.clamp_events, "path_failures": ens.n_failures},
    )
    (out / "config.json").write_text(serialize_config(cfg) + "\n")
    return 0


def _cmd_regimes(args) -> int:
    cfg = _load(args)
    block = _override_paths(cfg.regimes, args.paths)
    comparison = regime_comparison(
        cfg.market,
        cfg.hazard,
        horizon=block.horizon,
        n_paths=block.n_paths,
        base_seed=cfg.seed,
        inflow_rate=block.inflow_rate,
        outflow_rate=block.outflow_rate,
        n_workers=args.threads,
    )
    out = _out_dir(args, cfg)
    counters = {}
    for name, ens in comparison.as_dict().items():
        emit_series(ens, out / name)
        counters[f"{name}_clamp_events"] = ens.clamp_events
        counters[f"{name}_path_failures"] = ens.n_failures
    write_manifest(out, config_hash(cfg), cfg.seed, counters)
    (out / "config.json").write_text(serialize_config(cfg) + "\n")
    return 0


def _cycle_config(cfg: ExperimentConfig, n_paths: int | None) -> CycleConfig:
    block = _override_paths(cfg.cycle, n_paths)
    return CycleConfig(
        market=cfg.market,
        hazard=cfg.hazard,
        schedule=cfg.schedule,
        pre_phase=block.pre_phase,
        maturity=block.maturity,
        target_rate=block.target_rate,
        horizon=block.horizon,
        n_paths=block.n_paths,
        base_seed=cfg.seed,
        checkpoints=block.checkpoints,
    )


def _cmd_cycle(args) -> int:
    cfg = _load(args)
    cycle_cfg = _cycle_config(cfg, args.paths)
    ens = run_ensemble(cycle_cfg, n_workers=args.threads)
    out = _out_dir(args, cfg)
    emit_series(ens, out)
    write_manifest(
        out,
        config_hash(cfg),
        cfg.seed,
        {"clamp_events": ens.clamp_events, "path_failures": ens.n_failures},
    )
    (out / "config.json").write_text(serialize_config(cfg) + "\n")
    return 0


def _cmd_ponzi(args) -> int:
    cfg = _load(args)
    p = cfg.ponzi
    if cfg.kind == "ponzi-speculative":
        params = SpeculativePonziParams(
            market_impact=p.market_impact,
            withdrawal_rate=p.withdrawal_rate,
            maturity=p.maturity,
            initial_capital=p.initial_capital,
            external_rate=p.external_rate,
            literal_rate_coupling=p.literal_rate_coupling,
        )
        sol = speculative_ponzi_solve(params, cfg.schedule, p.horizon, p.step)
        steady = steady_state_rate(sol, p.steady_window)
        results = {
            "collapse_time": collapse_time(sol),
            "steady_rate": steady.rate,
            "steady_spread": steady.spread,
        }
    else:
        params = PonziParams(
            nominal_rate=p.nominal_rate,
            promised_rate=p.promised_rate,
            withdrawal_rate=p.withdrawal_rate,
            maturity=p.maturity,
            initial_capital=p.initial_capital,
        )
        sol = classical_ponzi_solve(params, cfg.schedule, p.horizon, p.step)
        results = {"collapse_time": collapse_time(sol)}
    out = _out_dir(args, cfg)
    emit_series(sol, out)
    write_manifest(out, config_hash(cfg), cfg.seed, {})
    _write_json(out / "results.json", results)
    (out / "config.json").write_text(serialize_config(cfg) + "\n")
    return 0


def _cmd_fit(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    counters: dict[str, int] = {}
    if cfg.fit.source_csv:
        table = read_csv_columns(cfg.fit.source_csv)
        column = "S_ext_mean" if "S_ext_mean" in table else "S_ext"
        if column not in table:
            raise ConfigurationError(
                f"{cfg.fit.source_csv} carries neither 'S_ext_mean' nor 'S_ext'"
            )
        times, values = table["t"], table[column]
    else:
        cycle_cfg = _cycle_config(cfg, args.paths)
        ens = run_ensemble(cycle_cfg, n_workers=args.threads)
        emit_series(ens, out)
        counters = {"clamp_events": ens.clamp_events, "path_failures": ens.n_failures}
        times, values = ens.times, ens.series["S_ext"].mean
    tau, observed = investment_phase_series(times, values, cfg.cycle.pre_phase)
    target_rate = (
        cfg.cycle.target_rate
        if cfg.cycle.target_rate is not None
        else cfg.market.annualized_target_rate()
    )
    result = fit_market_impact(
        tau,
        observed,
        cfg.schedule,
        target_rate,
        cfg.cycle.maturity,
        (cfg.fit.bracket_low, cfg.fit.bracket_high),
        tol=cfg.fit.tol,
    )
    fitted = speculative_ponzi_solve(
        SpeculativePonziParams(
            market_impact=result.market_impact,
            withdrawal_rate=target_rate,
            maturity=cfg.cycle.maturity,
            initial_capital=max(float(observed[0]), 0.0),
        ),
        cfg.schedule,
        float(tau[-1]),
        float(tau[1] - tau[0]),
    )
    emit_series(fitted, out, basename="fitted_ode")
    write_manifest(out, config_hash(cfg), cfg.seed, counters)
    _write_json(
        out / "fit.json",
        {
            "market_impact": result.market_impact,
            "rmse": result.rmse,
            "bracket": [cfg.fit.bracket_low, cfg.fit.bracket_high],
            "target_rate": target_rate,
        },
    )
    (out / "config.json").write_text(serialize_config(cfg) + "\n")
    return 0


def _cmd_stats(args) -> int:
    cfg = _load(args)
    if not cfg.stats.input_csv:
        raise ConfigurationError("stats requires 'stats.input_csv'")
    table = read_csv_columns(cfg.stats.input_csv)
    column = cfg.stats.price_column
    if column not in table:
        raise ConfigurationError(
            f"{cfg.stats.input_csv} has no column {column!r}; found {sorted(table)}"
        )
    measured = return_stats(table[column])
    predicted = cfg.market.theoretical()
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(
        out / "stats.json",
        {
            "measured": {
                "mean_log_return": measured.mean_log_return,
                "std_log_return": measured.std_log_return,
                "geometric_mean_return": measured.geometric_mean_return,
                "skewness": measured.skewness,
                "excess_kurtosis": measured.excess_kurtosis,
                "n_returns": measured.n_returns,
            },
            "predicted": {
                "daily_factor": predicted.daily_factor,
                "annualized_factor": predicted.daily_factor ** cfg.market.days_per_year,
                "volatility": predicted.volatility,
            },
        },
    )
    write_manifest(out, config_hash(cfg), cfg.seed, {})
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "regimes": _cmd_regimes,
    "cycle": _cmd_cycle,
    "ponzi": _cmd_ponzi,
    "fit-c0": _cmd_fit,
    "stats": _cmd_stats,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pricepump",
        description="Speculative-bubble market simulator and scheme-dynamics toolkit",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in _COMMANDS:
        p = sub.add_parser(verb)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output directory (default: config 'out' or ./out)")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--paths", type=int, help="override the configured path count")
        p.add_argument(
            "--threads",
            type=int,
            default=1,
            help="parallel workers; results are identical for any value",
        )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.verb](args)
    except ConfigurationError as exc:
        _report_error(exc)
        return 2
    except PricePumpError as exc:
        _report_error(exc)
        return 3
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        _report_error(exc)
        return 1


def _report_error(exc: Exception) -> None:
    record = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
