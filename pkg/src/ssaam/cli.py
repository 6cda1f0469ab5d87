"""Subcommand front end chaining the pipeline stages.

Stages write under ``<out>/<stage>/`` where ``<out>`` is ``--out``, the
``SSAAM_OUT`` environment variable, or ``./out``. Exit codes: 0 success,
1 internal error, 2 input or configuration error. All randomness sits
behind an explicit seed, and every backtest emits a manifest so a rerun
with identical inputs reproduces identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .backtest import (
    EquityCurve,
    PerfReport,
    RebalanceSchedule,
    StrategyConfig,
    StrategyKind,
    build_schedule,
    build_walk_forward_schedule,
    max_drawdown,
    report_csv,
    report_grid,
    run_backtest,
    total_return,
)
from .causal import format_lead_report, leading_effect, var_lingam, write_graph_json
from .cpd import Signal, detect_regimes, write_regimes_csv
from .data import (
    align_by_date,
    build_equal_weight_portfolio,
    format_ordinal,
    load_price_table,
    load_score_table,
)
from .errors import ConfigError, SsaamError
from .sentiment import build_polarity_index, load_index_csv, write_index_csv

logger = logging.getLogger(__name__)

OUT_ENV = "SSAAM_OUT"


def _out_root(args) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV, "out"))


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# polarity
# ---------------------------------------------------------------------------


def cmd_polarity(args) -> int:
    scores = load_score_table(args.scores)
    index = build_polarity_index(scores, agg=args.agg)
    out_dir = _out_root(args) / "polarity"
    out_path = out_dir / "index.csv"
    write_index_csv(index, out_path)
    print(
        f"polarity: {scores.n_rows} scores ({scores.n_dropped} dropped) -> "
        f"{index.dates.size} days, agg={args.agg} -> {out_path}"
    )
    return 0


# ---------------------------------------------------------------------------
# causal
# ---------------------------------------------------------------------------


def cmd_causal(args) -> int:
    prices = load_price_table(args.prices)
    index = load_index_csv(args.index)
    portfolio = build_equal_weight_portfolio(prices)
    panel = align_by_date(index, portfolio)
    graph = var_lingam(panel, lag=args.lag, threshold=args.threshold, seed=args.seed)
    report = leading_effect(graph, "index", "portfolio")
    out_dir = _out_root(args) / "causal"
    write_graph_json(graph, out_dir / "graph.json")
    text = format_lead_report(graph, report)
    (out_dir / "report.txt").write_text(text)
    print(text, end="")
    print(f"causal: panel of {panel.dates.size} dates -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# cpd
# ---------------------------------------------------------------------------


def cmd_cpd(args) -> int:
    index = load_index_csv(args.index)
    signal = Signal(index.values)
    regimes = detect_regimes(signal, n_regimes=args.regimes, min_size=args.min_size)
    out_dir = _out_root(args) / "cpd"
    out_path = out_dir / "regimes.csv"
    write_regimes_csv(regimes, index.dates, out_path)
    print(f"cpd: {signal.n_samples} samples -> {len(regimes)} regimes -> {out_path}")
    return 0


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    from .synth import SynthSpec, write_csvs

    out_dir = _out_root(args) / "synth"
    spec = SynthSpec(n_days=args.days, n_assets=args.assets, seed=args.seed)
    prices_path, scores_path = write_csvs(spec, out_dir)
    print(f"synth: {args.days} days x {args.assets} assets (seed {args.seed})")
    print(f"  {prices_path}")
    print(f"  {scores_path}")
    return 0


# ---------------------------------------------------------------------------
# backtest
# ---------------------------------------------------------------------------

_KIND_BY_NAME = {k.value: k for k in StrategyKind}

_GRID_CONTEXT: dict = {}


def _load_backtest_config(path: Path) -> dict:
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if "prices_csv" not in raw:
        raise ConfigError(f"{path}: missing 'prices_csv'")
    if "scores_csv" not in raw and "index_csv" not in raw:
        raise ConfigError(f"{path}: need 'scores_csv' or 'index_csv'")
    cfg = {
        "strategies": [k.value for k in StrategyKind],
        "period_days": [30, 90, 180],
        "n_regimes": [5, 10],
        "alpha": 0.05,
        "mu_target": None,
        "evar_cap": None,
        "lookback_days": 252,
        "initial_capital": 1.0,
        "min_size": 2,
        "agg": "sum",
        "seed": 0,
    }
    cfg.update(raw)
    for name in cfg["strategies"]:
        if name not in _KIND_BY_NAME:
            raise ConfigError(f"unknown strategy {name!r} (known: {sorted(_KIND_BY_NAME)})")
    return cfg


def _grid_cells(cfg: dict) -> list[StrategyConfig]:
    cells = []
    for name in cfg["strategies"]:
        kind = _KIND_BY_NAME[name]
        for period in cfg["period_days"]:
            if kind.uses_regimes:
                for n_regimes in cfg["n_regimes"]:
                    cells.append(
                        StrategyConfig(
                            kind=kind,
                            period_days=int(period),
                            n_regimes=int(n_regimes),
                            alpha=cfg["alpha"],
                            mu_target=cfg["mu_target"],
                            evar_cap=cfg["evar_cap"],
                            lookback_days=int(cfg["lookback_days"]),
                        )
                    )
            else:
                cells.append(
                    StrategyConfig(
                        kind=kind,
                        period_days=int(period),
                        alpha=cfg["alpha"],
                        mu_target=cfg["mu_target"],
                        evar_cap=cfg["evar_cap"],
                        lookback_days=int(cfg["lookback_days"]),
                    )
                )
    return cells


def _schedule_for(cell: StrategyConfig, ctx: dict) -> RebalanceSchedule:
    dates = ctx["dates"]
    start_idx = cell.lookback_days
    if cell.kind.uses_regimes:
        if ctx["walk_forward"]:
            return build_walk_forward_schedule(
                ctx["index_values"],
                dates,
                cell.period_days,
                cell.n_regimes,
                start_idx=start_idx,
                min_size=ctx["min_size"],
            )
        return build_schedule(
            dates, cell.period_days, ctx["regimes"][cell.n_regimes], start_idx=start_idx
        )
    return build_schedule(dates, cell.period_days, (), start_idx=start_idx)


def _run_cell(i: int) -> tuple[int, EquityCurve]:
    ctx = _GRID_CONTEXT
    cell = ctx["cells"][i]
    schedule = _schedule_for(cell, ctx)
    curve = run_backtest(
        ctx["prices"], schedule, cell, initial_capital=ctx["initial_capital"]
    )
    return i, curve


def _write_curve_csv(curve: EquityCurve, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "value"])
        for d, v in zip(curve.dates, curve.values):
            writer.writerow([format_ordinal(d), f"{v:.10f}"])


def _write_weights_csv(curve: EquityCurve, tickers, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "ticker", "weight"])
        for trade in curve.trades:
            for ticker, weight in zip(tickers, trade.new_weights):
                writer.writerow([format_ordinal(trade.date), ticker, f"{weight:.10f}"])


def _write_diagnostics(curve: EquityCurve, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    records = [
        {
            "date": format_ordinal(s.date),
            "mode": s.mode.value,
            "status": s.status,
            "objective": None if not np.isfinite(s.objective) else s.objective,
            "iterations": s.iterations,
        }
        for s in curve.solves
    ]
    path.write_text(json.dumps(records, indent=2, sort_keys=True) + "\n")


def cmd_backtest(args) -> int:
    config_path = Path(args.config)
    cfg = _load_backtest_config(config_path)
    out_dir = Path(cfg["out_dir"]) if "out_dir" in cfg else _out_root(args) / "backtest"

    prices_full = load_price_table(cfg["prices_csv"])
    if "index_csv" in cfg:
        index = load_index_csv(cfg["index_csv"])
        score_input = Path(cfg["index_csv"])
    else:
        scores = load_score_table(cfg["scores_csv"])
        index = build_polarity_index(scores, agg=cfg["agg"])
        score_input = Path(cfg["scores_csv"])
    portfolio = build_equal_weight_portfolio(prices_full)
    panel = align_by_date(index, portfolio)
    keep = np.isin(prices_full.dates, panel.dates)
    prices = prices_full.restrict(keep)

    signal = Signal(panel.index_values)
    regimes_by_count = {
        int(n): detect_regimes(signal, n_regimes=int(n), min_size=int(cfg["min_size"]))
        for n in cfg["n_regimes"]
    }

    cells = _grid_cells(cfg)
    ctx = {
        "cells": cells,
        "prices": prices,
        "dates": prices.dates,
        "index_values": panel.index_values,
        "regimes": regimes_by_count,
        "min_size": int(cfg["min_size"]),
        "initial_capital": float(cfg["initial_capital"]),
        "walk_forward": bool(args.walk_forward),
    }

    if args.dry_run:
        for cell in cells:
            schedule = _schedule_for(cell, ctx)
            kinds = [e for e in schedule.entries if e.source.value == "change_point"]
            print(
                f"{cell.label}: {len(schedule.entries)} rebalances "
                f"({len(kinds)} change points), first {format_ordinal(schedule.entries[0].date)}, "
                f"last {format_ordinal(schedule.entries[-1].date)}"
            )
        return 0

    global _GRID_CONTEXT
    _GRID_CONTEXT = ctx
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            curves = dict(pool.map(_run_cell, range(len(cells))))
    else:
        curves = dict(_run_cell(i) for i in range(len(cells)))

    results: list[PerfReport] = []
    outputs: list[Path] = []
    for i, cell in enumerate(cells):
        curve = curves[i]
        results.append(
            PerfReport(tr_pct=total_return(curve), mdd_pct=max_drawdown(curve), strategy=cell)
        )
        curve_path = out_dir / "curves" / f"{cell.label}.csv"
        _write_curve_csv(curve, curve_path)
        weights_path = out_dir / "weights" / f"{cell.label}.csv"
        _write_weights_csv(curve, prices.tickers, weights_path)
        diag_path = out_dir / "diagnostics" / f"{cell.label}.json"
        _write_diagnostics(curve, diag_path)
        outputs.extend([curve_path, weights_path, diag_path])

    table_text = report_grid(results)
    cpd_csv, cmp_csv = report_csv(results)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(table_text)
    (out_dir / "report_cpd.csv").write_text(cpd_csv)
    (out_dir / "report_comparison.csv").write_text(cmp_csv)
    outputs.extend([out_dir / "report.txt", out_dir / "report_cpd.csv", out_dir / "report_comparison.csv"])

    manifest = {
        "config_sha256": _sha256(config_path),
        "inputs": {
            str(Path(cfg["prices_csv"])): _sha256(Path(cfg["prices_csv"])),
            str(score_input): _sha256(score_input),
        },
        "seed": cfg["seed"],
        "kernel_backend": kernels.BACKEND,
        "walk_forward": bool(args.walk_forward),
        "versions": _versions(),
        "outputs": sorted(str(p) for p in outputs),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    print(table_text)
    print(f"backtest: {len(cells)} runs -> {out_dir}")
    return 0


def _versions() -> dict:
    import cvxpy
    import scipy

    versions = {
        "ssaam": __version__,
        "python": ".".join(map(str, sys.version_info[:3])),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "cvxpy": cvxpy.__version__,
    }
    if kernels.NUMBA_AVAILABLE:
        import numba

        versions["numba"] = numba.__version__
    return versions


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssaam",
        description="Sentiment polarity index, lead check, regime detection, EVaR backtest",
    )
    parser.add_argument("--version", action="version", version=f"ssaam {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("polarity", help="build the daily polarity index from sentence scores")
    p.add_argument("scores", help="score CSV (date,sentence_id,pll)")
    p.add_argument("--agg", choices=("sum", "mean"), default="sum")
    p.add_argument("--out", help=f"output root (default $%s or ./out)" % OUT_ENV)
    p.set_defaults(func=cmd_polarity)

    p = sub.add_parser("causal", help="test whether the index leads the portfolio")
    p.add_argument("prices", help="price CSV (date,<ticker>,...)")
    p.add_argument("index", help="polarity index CSV (date,index)")
    p.add_argument("--lag", type=int, default=1)
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_causal)

    p = sub.add_parser("cpd", help="segment the polarity index into trend-labeled regimes")
    p.add_argument("index", help="polarity index CSV (date,index)")
    p.add_argument("--regimes", type=int, default=5)
    p.add_argument("--min-size", type=int, default=2, dest="min_size")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cpd)

    p = sub.add_parser("backtest", help="run the strategy grid from a config file")
    p.add_argument("--config", required=True, help="run configuration JSON")
    p.add_argument("--dry-run", action="store_true", help="print resolved schedules only")
    p.add_argument("--jobs", type=int, default=1, help="parallel grid workers")
    p.add_argument(
        "--walk-forward",
        action="store_true",
        help="detect change points from past data only (extension, off by default)",
    )
    p.add_argument("--out")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("synth", help="generate the bundled synthetic dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--days", type=int, default=1250)
    p.add_argument("--assets", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SsaamError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        logger.exception("internal error")
        print(f"internal error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
