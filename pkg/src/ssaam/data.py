"""Price and score file ingestion, calendar alignment, reference portfolio.

Dates are ISO-8601 day strings externally and integer day ordinals
internally. Intraday timestamps are rejected (treated as unparseable).
All loaded tables are immutable; their arrays are marked read-only.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateDateError,
    EmptyIntersectionError,
    InputFormatError,
    NoParseableRowsError,
)


def parse_iso_date(text: str) -> int | None:
    """Day ordinal for a strict YYYY-MM-DD string, else None."""
    text = text.strip()
    if len(text) != 10:
        return None
    try:
        return date.fromisoformat(text).toordinal()
    except ValueError:
        return None


def format_ordinal(ordinal: int) -> str:
    return date.fromordinal(int(ordinal)).isoformat()


def _parse_price(token: str) -> float | None:
    """Positive finite float, else None (blank, non-numeric, non-positive)."""
    token = token.strip()
    if not token:
        return None
    try:
        value = float(token)
    except ValueError:
        return None
    if not math.isfinite(value) or value <= 0.0:
        return None
    return value


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PriceTable:
    """Adjusted close per (date, ticker); dates strictly increasing."""

    dates: np.ndarray  # (D,) int64 day ordinals
    tickers: tuple[str, ...]
    values: np.ndarray  # (D, K) float64, all > 0
    n_dropped: int = 0

    def __post_init__(self):
        if self.values.shape != (self.dates.size, len(self.tickers)):
            raise ValueError("price matrix shape does not match dates/tickers")
        _freeze(self.dates)
        _freeze(self.values)

    @property
    def n_dates(self) -> int:
        return int(self.dates.size)

    def iso_dates(self) -> list[str]:
        return [format_ordinal(o) for o in self.dates]

    def restrict(self, keep: np.ndarray) -> "PriceTable":
        """PriceTable on a boolean/index subset of dates (order preserved)."""
        return PriceTable(
            dates=self.dates[keep].copy(),
            tickers=self.tickers,
            values=self.values[keep].copy(),
            n_dropped=self.n_dropped,
        )


@dataclass(frozen=True)
class ScoreTable:
    """Per-sentence log-likelihood scores; one row per scored sentence."""

    dates: np.ndarray  # (R,) int64 day ordinals, not necessarily unique
    sentence_ids: tuple[str, ...]
    pll: np.ndarray  # (R,) float64, finite
    n_dropped: int = 0

    def __post_init__(self):
        _freeze(self.dates)
        _freeze(self.pll)

    @property
    def n_rows(self) -> int:
        return int(self.dates.size)


@dataclass(frozen=True)
class DatedSeries:
    """A float series keyed by day ordinals."""

    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.dates.size != self.values.size:
            raise ValueError("dates and values differ in length")
        _freeze(self.dates)
        _freeze(self.values)


@dataclass(frozen=True)
class AlignedPanel:
    """Polarity index and portfolio level on their common dates."""

    dates: np.ndarray
    index_values: np.ndarray
    portfolio_values: np.ndarray

    def __post_init__(self):
        _freeze(self.dates)
        _freeze(self.index_values)
        _freeze(self.portfolio_values)

    def to_matrix(self) -> np.ndarray:
        """(T, 2) column order: index, portfolio."""
        return np.column_stack([self.index_values, self.portfolio_values]).astype(np.float64)

    @property
    def variables(self) -> tuple[str, str]:
        return ("index", "portfolio")


def load_price_table(path: str | Path) -> PriceTable:
    """Load a price CSV with header ``date,<ticker>,...``.

    Rows with any blank, non-numeric, or non-positive cell are dropped and
    counted. Duplicate dates among kept rows are an error (silent dedup
    would hide corrupt data); rows may arrive unsorted and are sorted here.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputFormatError(f"{path}: empty file") from None
        if len(header) < 2 or header[0].strip().lower() != "date":
            raise InputFormatError(f"{path}: expected header 'date,<ticker>,...'")
        tickers = tuple(h.strip() for h in header[1:])
        kept: list[tuple[int, list[float]]] = []
        dropped = 0
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                dropped += 1
                continue
            ordinal = parse_iso_date(row[0])
            prices = [_parse_price(c) for c in row[1:]]
            if ordinal is None or any(p is None for p in prices):
                dropped += 1
                continue
            kept.append((ordinal, prices))  # type: ignore[arg-type]
    if not kept:
        raise NoParseableRowsError(f"{path}: no parseable price rows")
    kept.sort(key=lambda item: item[0])
    dates = np.array([d for d, _ in kept], dtype=np.int64)
    dup = np.flatnonzero(np.diff(dates) == 0)
    if dup.size:
        raise DuplicateDateError(f"{path}: duplicate date {format_ordinal(dates[dup[0]])}")
    values = np.array([p for _, p in kept], dtype=np.float64)
    return PriceTable(dates=dates, tickers=tickers, values=values, n_dropped=dropped)


def load_score_table(path: str | Path) -> ScoreTable:
    """Load a score CSV with header ``date,sentence_id,pll``.

    Rows with an unparseable date or non-finite pll are dropped and counted;
    an empty result is allowed here and rejected downstream where a minimum
    sample size applies.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            # empty file: an empty table, rejected downstream where a
            # minimum sample size applies
            return ScoreTable(
                dates=np.array([], dtype=np.int64),
                sentence_ids=(),
                pll=np.array([], dtype=np.float64),
            )
        expected = ["date", "sentence_id", "pll"]
        if [h.strip().lower() for h in header[:3]] != expected:
            raise InputFormatError(f"{path}: expected header 'date,sentence_id,pll'")
        dates: list[int] = []
        ids: list[str] = []
        pll: list[float] = []
        dropped = 0
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 3:
                dropped += 1
                continue
            ordinal = parse_iso_date(row[0])
            try:
                score = float(row[2])
            except ValueError:
                score = math.nan
            if ordinal is None or not math.isfinite(score):
                dropped += 1
                continue
            dates.append(ordinal)
            ids.append(row[1].strip())
            pll.append(score)
    return ScoreTable(
        dates=np.array(dates, dtype=np.int64),
        sentence_ids=tuple(ids),
        pll=np.array(pll, dtype=np.float64),
        n_dropped=dropped,
    )


def build_equal_weight_portfolio(prices: PriceTable) -> DatedSeries:
    """Reference portfolio level: sum of adjusted closes per date.

    One unit of every stock, i.e. a uniform holding across tickers.
    """
    if prices.n_dates == 0:
        raise NoParseableRowsError("empty price table")
    return DatedSeries(dates=prices.dates.copy(), values=prices.values.sum(axis=1))


def align_by_date(index, portfolio: DatedSeries) -> AlignedPanel:
    """Inner join of a polarity index and a portfolio series on date.

    ``index`` is anything with ``dates``/``values`` arrays. Order is
    preserved (both inputs are date-sorted).
    """
    common, ia, ib = np.intersect1d(index.dates, portfolio.dates, return_indices=True)
    if common.size == 0:
        raise EmptyIntersectionError("index and portfolio share no dates")
    return AlignedPanel(
        dates=common.astype(np.int64),
        index_values=np.asarray(index.values, dtype=np.float64)[ia].copy(),
        portfolio_values=np.asarray(portfolio.values, dtype=np.float64)[ib].copy(),
    )


def write_price_csv(prices: PriceTable, path: str | Path) -> None:
    """Canonical form emitter; loading it back reproduces the table."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", *prices.tickers])
        for i in range(prices.n_dates):
            writer.writerow(
                [format_ordinal(prices.dates[i])] + [repr(float(v)) for v in prices.values[i]]
            )
