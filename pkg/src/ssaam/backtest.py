"""Rebalance scheduling, the five strategies, and performance reporting.

A schedule merges periodic rebalances (every ``period_days`` trading days)
with change-point rebalances at regime starts; a date hit by both counts as
a change point. The engine estimates returns from the trailing lookback
window only, solves the optimizer picked for the entry, trades to the new
weights at that date's close with no costs, and compounds the valuation
until the next entry. An infeasible or failed solve keeps the incumbent
weights and is logged.

Strategies:

* CPD-EVaR++  risk-min EVaR with a return floor at periodic and up-trend
              change points, return-max EVaR at down-trend change points
* CPD-EVaR+   risk-min EVaR with a return floor, dropping the floor at
              down-trend change points
* EVaR/CVaR/MV  the respective optimizer at periodic dates only
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .cpd import Regime, Signal, Trend, binseg, classify_trend, cost_l2
from .data import PriceTable, format_ordinal
from .errors import ConfigError, InsufficientHistoryError, SsaamError
from .optim import (
    ConeSolution,
    RiskSpec,
    SolveStatus,
    default_evar_cap,
    default_mu_target,
    max_return_evar_portfolio,
    min_cvar_portfolio,
    min_evar_portfolio,
    min_variance_portfolio,
    sanitize_weights,
)

logger = logging.getLogger(__name__)


class Source(Enum):
    PERIODIC = "periodic"
    CHANGE_POINT = "change_point"


class StrategyKind(Enum):
    CPD_EVAR_PP = "CPD-EVaR++"
    CPD_EVAR_P = "CPD-EVaR+"
    EVAR = "EVaR"
    CVAR = "CVaR"
    MV = "MV"

    @property
    def uses_regimes(self) -> bool:
        return self in (StrategyKind.CPD_EVAR_PP, StrategyKind.CPD_EVAR_P)


class OptimizerMode(Enum):
    MIN_EVAR_TARGET = "min_evar_target"
    MIN_EVAR_FREE = "min_evar_free"
    MAX_RETURN_CAP = "max_return_cap"
    MIN_CVAR = "min_cvar"
    MIN_VARIANCE = "min_variance"
    SKIP = "skip"


@dataclass(frozen=True)
class ScheduleEntry:
    idx: int  # position in the trading calendar
    date: int  # day ordinal
    source: Source
    trend: Trend | None = None


@dataclass(frozen=True)
class RebalanceSchedule:
    entries: tuple[ScheduleEntry, ...]

    def __post_init__(self):
        idxs = [e.idx for e in self.entries]
        if sorted(set(idxs)) != idxs:
            raise ConfigError("schedule entries must be unique and sorted")


@dataclass(frozen=True)
class StrategyConfig:
    """One cell of the strategy grid.

    ``n_regimes`` applies to the CPD-* kinds only. A None ``mu_target`` or
    ``evar_cap`` resolves per rebalance window (mean of per-asset means,
    minimal EVaR plus half its magnitude).
    """

    kind: StrategyKind
    period_days: int
    n_regimes: int | None = None
    alpha: float = 0.05
    mu_target: float | None = None
    evar_cap: float | None = None
    lookback_days: int = 252

    def __post_init__(self):
        if self.period_days < 1:
            raise ConfigError("period_days must be >= 1")
        if self.kind.uses_regimes:
            if self.n_regimes is None or self.n_regimes < 1:
                raise ConfigError(f"{self.kind.value} needs n_regimes >= 1")
        elif self.n_regimes is not None:
            raise ConfigError(f"{self.kind.value} does not take n_regimes")
        if self.lookback_days < 2:
            raise ConfigError("lookback_days must be >= 2")

    @property
    def label(self) -> str:
        if self.kind.uses_regimes:
            return f"{self.kind.value}_p{self.period_days}_r{self.n_regimes}"
        return f"{self.kind.value}_p{self.period_days}"


@dataclass(frozen=True)
class SolveRecord:
    date: int
    mode: OptimizerMode
    status: str
    objective: float
    iterations: int | None


@dataclass(frozen=True)
class Trade:
    date: int
    old_weights: np.ndarray
    new_weights: np.ndarray
    pre_value: float
    post_value: float
    bought: float
    sold: float


@dataclass(frozen=True)
class EquityCurve:
    dates: np.ndarray
    values: np.ndarray
    trades: tuple[Trade, ...]
    initial_capital: float
    cum_bought: float
    cum_sold: float
    distributions: float = 0.0
    solves: tuple[SolveRecord, ...] = ()


@dataclass(frozen=True)
class PerfReport:
    tr_pct: float
    mdd_pct: float  # signed, <= 0
    strategy: StrategyConfig


def build_schedule(
    dates: np.ndarray,
    period_days: int,
    regimes: Sequence[Regime] = (),
    start_idx: int = 0,
) -> RebalanceSchedule:
    """Union of periodic dates and regime-start dates from ``start_idx`` on.

    Change points carry their regime's trend label; a collision keeps the
    change-point entry. Regime starts before ``start_idx`` are skipped
    (their boundary predates the first tradable date).
    """
    n = int(np.asarray(dates).size)
    if n == 0:
        raise ConfigError("empty calendar")
    if not (0 <= start_idx < n):
        raise InsufficientHistoryError(f"start_idx {start_idx} outside calendar of {n}")
    chosen: dict[int, ScheduleEntry] = {}
    for idx in range(start_idx, n, period_days):
        chosen[idx] = ScheduleEntry(idx=idx, date=int(dates[idx]), source=Source.PERIODIC)
    for regime in regimes:
        idx = regime.start
        if idx < start_idx or idx >= n:
            continue
        chosen[idx] = ScheduleEntry(
            idx=idx, date=int(dates[idx]), source=Source.CHANGE_POINT, trend=regime.trend
        )
    entries = tuple(chosen[i] for i in sorted(chosen))
    return RebalanceSchedule(entries=entries)


def select_optimizer(config: StrategyConfig, entry: ScheduleEntry) -> OptimizerMode:
    """Which program runs at this entry under this strategy."""
    kind = config.kind
    if kind is StrategyKind.CPD_EVAR_PP:
        if entry.source is Source.CHANGE_POINT:
            return (
                OptimizerMode.MIN_EVAR_TARGET
                if entry.trend is Trend.UP
                else OptimizerMode.MAX_RETURN_CAP
            )
        return OptimizerMode.MIN_EVAR_TARGET
    if kind is StrategyKind.CPD_EVAR_P:
        if entry.source is Source.CHANGE_POINT and entry.trend is Trend.DOWN:
            return OptimizerMode.MIN_EVAR_FREE
        return OptimizerMode.MIN_EVAR_TARGET
    if entry.source is Source.CHANGE_POINT:
        return OptimizerMode.SKIP
    if kind is StrategyKind.EVAR:
        return OptimizerMode.MIN_EVAR_TARGET
    if kind is StrategyKind.CVAR:
        return OptimizerMode.MIN_CVAR
    return OptimizerMode.MIN_VARIANCE


def _solve_mode(
    mode: OptimizerMode, window: np.ndarray, config: StrategyConfig, date: int = 0
) -> tuple[np.ndarray | None, SolveRecord | None]:
    """Dispatch one rebalance solve; None weights means keep the incumbent."""
    alpha = config.alpha
    try:
        if mode in (OptimizerMode.MIN_EVAR_TARGET, OptimizerMode.MIN_EVAR_FREE):
            target = None
            if mode is OptimizerMode.MIN_EVAR_TARGET:
                target = (
                    config.mu_target if config.mu_target is not None else default_mu_target(window)
                )
            sol = min_evar_portfolio(window, RiskSpec(alpha=alpha, mu_target=target))
            return _from_cone(sol, mode, date)
        if mode is OptimizerMode.MAX_RETURN_CAP:
            cap = (
                config.evar_cap
                if config.evar_cap is not None
                else default_evar_cap(window, alpha=alpha)
            )
            sol = max_return_evar_portfolio(window, RiskSpec(alpha=alpha, evar_cap=cap))
            return _from_cone(sol, mode, date)
        if mode is OptimizerMode.MIN_CVAR:
            target = config.mu_target if config.mu_target is not None else default_mu_target(window)
            w = min_cvar_portfolio(window, alpha=alpha, mu_target=target)
            return w, SolveRecord(date, mode, "optimal", math.nan, None)
        if mode is OptimizerMode.MIN_VARIANCE:
            target = config.mu_target if config.mu_target is not None else default_mu_target(window)
            w = min_variance_portfolio(window, mu_target=target)
            return w, SolveRecord(date, mode, "optimal", math.nan, None)
    except SsaamError as exc:
        logger.warning("%s solve failed: %s", mode.value, exc)
        return None, SolveRecord(date, mode, "error", math.nan, None)
    raise ConfigError(f"no solver for mode {mode}")


def _from_cone(sol: ConeSolution, mode: OptimizerMode, date: int):
    record = SolveRecord(date, mode, sol.status.value, sol.objective, sol.iterations)
    if sol.w is None or sol.status is SolveStatus.INFEASIBLE:
        return None, record
    return sanitize_weights(sol.w), record


def run_backtest(
    prices: PriceTable,
    schedule: RebalanceSchedule,
    config: StrategyConfig,
    initial_capital: float = 1.0,
    solver_fn: Callable | None = None,
) -> EquityCurve:
    """Run one strategy over the schedule; fractional shares, no costs.

    Return estimation at calendar position t uses the simple daily returns
    of prices[t - lookback .. t] only, so no future price enters any
    decision. The incumbent before the first solve is equal weights.
    ``solver_fn(mode, window, config) -> weights | None`` overrides the
    optimizer dispatch (used by differential tests).
    """
    if not schedule.entries:
        raise ConfigError("empty schedule")
    px = prices.values
    dates = prices.dates
    lookback = config.lookback_days
    first = schedule.entries[0].idx
    if first < lookback:
        raise InsufficientHistoryError(
            f"first rebalance at position {first} but lookback is {lookback}"
        )
    solver = solver_fn or (lambda mode, window, cfg: _solve_mode(mode, window, cfg)[0])

    n_assets = px.shape[1]
    entry_at = {e.idx: e for e in schedule.entries}
    weights = np.full(n_assets, 1.0 / n_assets)  # incumbent seed before the first solve
    holdings = np.zeros(n_assets)
    cum_bought = 0.0
    cum_sold = 0.0
    trades: list[Trade] = []
    solves: list[SolveRecord] = []

    out_dates = dates[first:]
    out_values = np.empty(out_dates.size)
    for t in range(first, dates.size):
        price_t = px[t]
        entry = entry_at.get(t)
        if entry is not None:
            first_trade = not trades
            mode = select_optimizer(config, entry)
            new_w = None
            if mode is not OptimizerMode.SKIP:
                window = px[t - lookback : t + 1]
                returns = window[1:] / window[:-1] - 1.0
                if solver_fn is None:
                    new_w, record = _solve_mode(mode, returns, config, int(dates[t]))
                    if record is not None:
                        solves.append(record)
                else:
                    new_w = solver(mode, returns, config)
                if new_w is None and not first_trade:
                    logger.warning("keeping incumbent weights at %s", format_ordinal(dates[t]))
            if new_w is None and first_trade:
                new_w = weights  # seed: the backtest must start invested
            if new_w is not None:
                pre_value = initial_capital if first_trade else float(holdings @ price_t)
                old_w = weights.copy() if first_trade else holdings * price_t / pre_value
                weights = np.asarray(new_w, dtype=np.float64)
                new_holdings = pre_value * weights / price_t
                delta_value = (new_holdings - holdings) * price_t
                bought = float(np.clip(delta_value, 0.0, None).sum())
                sold = float(np.clip(-delta_value, 0.0, None).sum())
                holdings = new_holdings
                post_value = float(holdings @ price_t)
                cum_bought += bought
                cum_sold += sold
                trades.append(
                    Trade(
                        date=int(dates[t]),
                        old_weights=old_w,
                        new_weights=weights.copy(),
                        pre_value=pre_value,
                        post_value=post_value,
                        bought=bought,
                        sold=sold,
                    )
                )
        out_values[t - first] = holdings @ price_t
    return EquityCurve(
        dates=out_dates.copy(),
        values=out_values,
        trades=tuple(trades),
        initial_capital=initial_capital,
        cum_bought=cum_bought,
        cum_sold=cum_sold,
        solves=tuple(solves),
    )


def total_return(curve: EquityCurve) -> float:
    """Percent gain: valuation + distributions + sold - bought, over initial.

    With full reinvestment and no costs every rebalance self-finances, so
    this reduces to (final - initial) / initial * 100.
    """
    if curve.values.size == 0:
        raise ConfigError("empty curve")
    final = float(curve.values[-1])
    gain = final + curve.distributions + curve.cum_sold - curve.cum_bought
    if curve.trades:
        return gain / curve.initial_capital * 100.0
    # fixture curves without trade logs: plain valuation change
    return (final - curve.values[0] + curve.distributions) / curve.values[0] * 100.0


def max_drawdown(curve: EquityCurve) -> float:
    """Worst peak-to-trough decline in percent, signed (<= 0)."""
    if curve.values.size == 0:
        raise ConfigError("empty curve")
    return float(kernels.max_drawdown_path(np.ascontiguousarray(curve.values)) * 100.0)


_CPD_KINDS = (StrategyKind.CPD_EVAR_PP, StrategyKind.CPD_EVAR_P)
_CMP_KINDS = (StrategyKind.EVAR, StrategyKind.CVAR, StrategyKind.MV)


def _sorted_cpd(results: Sequence[PerfReport]) -> list[PerfReport]:
    rows = [r for r in results if r.strategy.kind in _CPD_KINDS]
    return sorted(
        rows,
        key=lambda r: (
            r.strategy.period_days,
            r.strategy.n_regimes,
            _CPD_KINDS.index(r.strategy.kind),
        ),
    )


def _sorted_cmp(results: Sequence[PerfReport]) -> list[PerfReport]:
    rows = [r for r in results if r.strategy.kind in _CMP_KINDS]
    return sorted(
        rows, key=lambda r: (r.strategy.period_days, _CMP_KINDS.index(r.strategy.kind))
    )


def report_grid(results: Sequence[PerfReport]) -> str:
    """Both result tables as fixed-width text.

    Change-point strategies carry a Regime column; comparison strategies do
    not. The best TR and best MDD per table are flagged with ``*``; MDD is
    displayed as a magnitude.
    """
    if not results:
        raise ConfigError("no results to report")
    blocks = []
    cpd_rows = _sorted_cpd(results)
    if cpd_rows:
        blocks.append(_format_table(cpd_rows, with_regime=True, title="Backtest (change-point strategies)"))
    cmp_rows = _sorted_cmp(results)
    if cmp_rows:
        blocks.append(_format_table(cmp_rows, with_regime=False, title="Backtest (comparison strategies)"))
    return "\n".join(blocks)


def _format_table(rows: list[PerfReport], with_regime: bool, title: str) -> str:
    best_tr = max(r.tr_pct for r in rows)
    best_mdd = max(r.mdd_pct for r in rows)  # signed: closest to zero
    header = ["Rebalance", "Regime", "Algorithm", "TR [%]", "MDD [%]"]
    if not with_regime:
        header.remove("Regime")
    lines = [title, ""]
    widths = [11, 7, 12, 14, 12] if with_regime else [11, 12, 14, 12]
    lines.append("".join(h.ljust(w) for h, w in zip(header, widths)))
    lines.append("-" * sum(widths))
    for r in rows:
        tr = f"{r.tr_pct:.4f}" + (" *" if r.tr_pct == best_tr else "")
        mdd = f"{abs(r.mdd_pct):.4f}" + (" *" if r.mdd_pct == best_mdd else "")
        cells = [f"{r.strategy.period_days}-days"]
        if with_regime:
            cells.append(str(r.strategy.n_regimes))
        cells.extend([r.strategy.kind.value, tr, mdd])
        lines.append("".join(c.ljust(w) for c, w in zip(cells, widths)))
    lines.append("")
    return "\n".join(lines)


def report_csv(results: Sequence[PerfReport]) -> tuple[str, str]:
    """(cpd_csv, comparison_csv) with the same ordering as report_grid."""
    cpd_lines = ["rebalance_days,regime,algorithm,tr_pct,mdd_pct"]
    for r in _sorted_cpd(results):
        cpd_lines.append(
            f"{r.strategy.period_days},{r.strategy.n_regimes},{r.strategy.kind.value},"
            f"{r.tr_pct:.4f},{abs(r.mdd_pct):.4f}"
        )
    cmp_lines = ["rebalance_days,algorithm,tr_pct,mdd_pct"]
    for r in _sorted_cmp(results):
        cmp_lines.append(
            f"{r.strategy.period_days},{r.strategy.kind.value},"
            f"{r.tr_pct:.4f},{abs(r.mdd_pct):.4f}"
        )
    return "\n".join(cpd_lines) + "\n", "\n".join(cmp_lines) + "\n"


def build_walk_forward_schedule(
    index_values: np.ndarray,
    dates: np.ndarray,
    period_days: int,
    n_regimes: int,
    start_idx: int,
    min_size: int = 2,
    confirm_lag: int = 5,
    min_gain_ratio: float = 0.3,
) -> RebalanceSchedule:
    """Look-ahead-free variant: change points from prefix re-detection.

    This is an extension beyond the reference protocol (which segments the
    full index once). Each day the segmenter reruns on the data seen so far
    with up to ``n_regimes - 1`` breakpoints; a breakpoint triggers a
    rebalance once it (a) has been detected at a stable location (within 2
    samples) on ``confirm_lag`` consecutive days, (b) lies at least
    ``confirm_lag`` samples in the past, and (c) cuts the cost of its local
    segment by at least ``min_gain_ratio`` (count-stopped segmentation
    always returns splits, so raw detections on featureless data are
    noise). The trend label at confirmation uses only samples since the
    breakpoint. Every decision at day t is a function of data up to t.
    """
    values = np.asarray(index_values, dtype=np.float64)
    n = values.size
    if n != np.asarray(dates).size:
        raise ConfigError("index and calendar length differ")
    total_bkps = max(1, n_regimes - 1)
    confirmed: list[int] = []
    streaks: dict[int, int] = {}
    cp_entries: dict[int, ScheduleEntry] = {}
    warmup = max(start_idx, 4 * min_size, confirm_lag + 2)

    def local_gain_ratio(b: int, t: int) -> float:
        sig = Signal(values[:t])
        lo = max([c for c in confirmed if c < b], default=0)
        hi = min([c for c in confirmed if c > b], default=t)
        parent = cost_l2(sig, lo, hi)
        if parent <= 0.0:
            return 0.0
        children = cost_l2(sig, lo, b) + cost_l2(sig, b, hi)
        return 1.0 - children / parent

    for t in range(warmup, n):
        budget = min(total_bkps, t // min_size - 1)
        if budget < 1:
            continue
        try:
            bkps = binseg(Signal(values[:t]), n_bkps=budget, min_size=min_size)
        except SsaamError:
            continue
        new_streaks: dict[int, int] = {}
        for b in bkps.indexes:
            match = next((loc for loc in sorted(streaks) if abs(b - loc) <= 2), None)
            new_streaks[b] = streaks[match] + 1 if match is not None else 1
        streaks = new_streaks
        for b in sorted(streaks):
            if streaks[b] < confirm_lag or t - b < confirm_lag:
                continue
            if any(abs(b - c) <= 2 for c in confirmed):
                continue
            if local_gain_ratio(b, t) < min_gain_ratio:
                continue
            confirmed.append(b)
            trend = classify_trend(Signal(values[: t + 1]), b, t + 1)
            cp_entries[t] = ScheduleEntry(
                idx=t, date=int(dates[t]), source=Source.CHANGE_POINT, trend=trend
            )
    chosen: dict[int, ScheduleEntry] = {}
    for idx in range(start_idx, n, period_days):
        chosen[idx] = ScheduleEntry(idx=idx, date=int(dates[idx]), source=Source.PERIODIC)
    chosen.update({i: e for i, e in cp_entries.items() if i >= start_idx})
    return RebalanceSchedule(entries=tuple(chosen[i] for i in sorted(chosen)))
