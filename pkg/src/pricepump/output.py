"""Bit-stable serialization of simulation and solver output.

Series go to CSV with a fixed header and floats printed with 17
significant digits, so re-parsing recovers the in-memory values exactly
and identical (config, seed) runs produce byte-identical files.  Each
run also writes a JSON manifest recording the configuration hash, seed,
code version, and clamp/failure counters; manifests carry no wall-clock
information.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .cycle import EnsembleStats, PathRecord
from .ponzi import OdeSolution

# Banded columns get mean/p10/p50/p90; everything else mean only.
_BANDED = ("log_price", "Ha", "Hp")
_PATH_COLUMNS = ("price", "log_price", "Ha", "Hp", "H", "xin", "R", "S_ext", "total_cash")


def format_float(value: float) -> str:
    return f"{value:.17g}"


def _write_csv(path: Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> Path:
    lengths = {len(c) for c in columns}
    if len(lengths) != 1:
        raise ValueError(f"columns have unequal lengths {sorted(lengths)}")
    rows = lengths.pop()
    with open(path, "w", newline="") as handle:
        handle.write(",".join(header) + "\n")
        for i in range(rows):
            handle.write(",".join(format_float(float(c[i])) for c in columns) + "\n")
    return path


def write_path_record(record: PathRecord, out_dir: Path, basename: str = "path") -> list[Path]:
    series = record.columns()
    header = ["t", *_PATH_COLUMNS]
    columns = [record.times, *(series[name] for name in _PATH_COLUMNS)]
    files = [_write_csv(out_dir / f"{basename}.csv", header, columns)]
    if record.snapshots:
        files.append(_write_snapshot_histograms(record, out_dir / f"{basename}_cash_hist.csv"))
    return files


def _write_snapshot_histograms(record: PathRecord, path: Path, bins: int = 50) -> Path:
    rows: list[tuple[float, float, float, float]] = []
    for snap in record.snapshots:
        top = float(snap.cash.max())
        edges = np.linspace(0.0, top if top > 0.0 else 1.0, bins + 1)
        counts, edges = np.histogram(snap.cash, bins=edges)
        for lo, hi, count in zip(edges[:-1], edges[1:], counts):
            rows.append((snap.time, float(lo), float(hi), float(count)))
    with open(path, "w", newline="") as handle:
        handle.write("checkpoint_t,bin_lo,bin_hi,count\n")
        for row in rows:
            handle.write(",".join(format_float(v) for v in row) + "\n")
    return path


def write_ensemble(stats: EnsembleStats, out_dir: Path, basename: str = "ensemble") -> list[Path]:
    header = ["t"]
    columns = [stats.times]
    for name in _PATH_COLUMNS:
        summary = stats.series[name]
        header.append(f"{name}_mean")
        columns.append(summary.mean)
        if name in _BANDED:
            for stat in ("p10", "p50", "p90"):
                header.append(f"{name}_{stat}")
                columns.append(getattr(summary, stat))
    files = [_write_csv(out_dir / f"{basename}.csv", header, columns)]

    if stats.histograms:
        hist_path = out_dir / f"{basename}_cash_hist.csv"
        with open(hist_path, "w", newline="") as handle:
            handle.write("checkpoint_t,bin_lo,bin_hi,count\n")
            for hist in stats.histograms:
                for lo, hi, count in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts):
                    handle.write(
                        ",".join(format_float(v) for v in (hist.time, lo, hi, count)) + "\n"
                    )
        files.append(hist_path)

    returns_path = out_dir / f"{basename}_returns.json"
    pooled = stats.pooled_returns
    payload = {
        "pooled": {
            "mean_log_return": pooled.mean_log_return,
            "std_log_return": pooled.std_log_return,
            "geometric_mean_return": pooled.geometric_mean_return,
            "skewness": pooled.skewness,
            "excess_kurtosis": pooled.excess_kurtosis,
            "n_returns": pooled.n_returns,
        },
        "predicted": {
            "daily_factor": stats.theoretical.daily_factor,
            "volatility": stats.theoretical.volatility,
        },
    }
    returns_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    files.append(returns_path)
    return files


def write_ode_solution(sol: OdeSolution, out_dir: Path, basename: str = "ode") -> list[Path]:
    header = ["t", "S", "R"]
    columns = [sol.grid, sol.capital, sol.withdrawable]
    if sol.nominal_rate is not None:
        header.append("r_n")
        columns.append(sol.nominal_rate)
    if sol.log_growth is not None:
        header.append("J")
        columns.append(sol.log_growth)
    return [_write_csv(out_dir / f"{basename}.csv", header, columns)]


def emit_series(obj, out_dir: str | Path, basename: str | None = None) -> list[Path]:
    """Serialize a path record, ensemble, or solver solution into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(obj, PathRecord):
        return write_path_record(obj, out, basename or "path")
    if isinstance(obj, EnsembleStats):
        return write_ensemble(obj, out, basename or "ensemble")
    if isinstance(obj, OdeSolution):
        return write_ode_solution(obj, out, basename or "ode")
    raise TypeError(f"no serializer for {type(obj).__name__}")


def write_manifest(
    out_dir: str | Path,
    config_sha256: str,
    seed: int,
    counters: dict[str, int] | None = None,
    extra: dict | None = None,
) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "config_sha256": config_sha256,
        "seed": seed,
        "version": __version__,
        "counters": dict(sorted((counters or {}).items())),
    }
    if extra:
        payload.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def read_csv_columns(path: str | Path) -> dict[str, np.ndarray]:
    """Read one of this package's CSV files back into named float arrays."""
    path = Path(path)
    with open(path) as handle:
        header = handle.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: header has {len(header)} fields, rows have {data.shape[1]}")
    return {name: data[:, i] for i, name in enumerate(header)}
