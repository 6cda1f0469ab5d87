"""Polarity labels from per-sentence scores and the daily polarity index.

A sentence scores +1 when its log-likelihood score exceeds the third
quartile of the whole scored corpus, -1 below the first quartile, else 0;
labels are then aggregated per calendar day.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .data import ScoreTable, format_ordinal, parse_iso_date
from .errors import InputFormatError, NoParseableRowsError, TooFewScoresError


class PolarityLabel(IntEnum):
    NEGATIVE = -1
    NEUTRAL = 0
    POSITIVE = 1


@dataclass(frozen=True)
class Quartiles:
    """First and third quartile of a score sample."""

    q1: float
    q3: float

    def __post_init__(self):
        if not (self.q1 <= self.q3):
            raise ValueError("q1 must not exceed q3")


@dataclass(frozen=True)
class PolarityIndex:
    """Daily aggregate of sentence polarity labels.

    ``agg`` records the aggregation rule: "sum" (default, integer-valued)
    or "mean".
    """

    dates: np.ndarray  # (D,) int64 day ordinals, strictly increasing
    values: np.ndarray  # (D,) float64
    agg: str = "sum"

    def __post_init__(self):
        self.dates.flags.writeable = False
        self.values.flags.writeable = False


def compute_quartiles(scores) -> Quartiles:
    """Quartiles by linear interpolation on the ordered sample.

    Uses positions 1 + (n - 1) * p on the sorted values (the widespread
    default estimator), so e.g. [1, 2, 3, 4] gives q1 = 1.75, q3 = 3.25.
    Requires at least 4 finite scores.
    """
    arr = np.asarray(scores, dtype=np.float64)
    if arr.size < 4:
        raise TooFewScoresError(f"need >= 4 scores, got {arr.size}")
    if not np.isfinite(arr).all():
        raise TooFewScoresError("scores must be finite")
    q1, q3 = np.quantile(arr, [0.25, 0.75])
    return Quartiles(q1=float(q1), q3=float(q3))


def classify_polarity(pll: float, q: Quartiles) -> PolarityLabel:
    """Three-way label; both boundaries map to neutral."""
    if pll > q.q3:
        return PolarityLabel.POSITIVE
    if pll < q.q1:
        return PolarityLabel.NEGATIVE
    return PolarityLabel.NEUTRAL


def classify_polarity_many(pll: np.ndarray, q: Quartiles) -> np.ndarray:
    """Vectorized classify_polarity; returns an int8 array of -1/0/+1."""
    pll = np.asarray(pll, dtype=np.float64)
    labels = np.zeros(pll.shape, dtype=np.int8)
    labels[pll > q.q3] = 1
    labels[pll < q.q1] = -1
    return labels


def build_polarity_index(scores: ScoreTable, agg: str = "sum") -> PolarityIndex:
    """Label every sentence against corpus-wide quartiles, aggregate daily.

    Quartiles are computed over the full table in one pass (not rolling).
    """
    if agg not in ("sum", "mean"):
        raise ValueError(f"unknown aggregation {agg!r}")
    if scores.n_rows == 0:
        raise TooFewScoresError("empty score table")
    q = compute_quartiles(scores.pll)
    labels = classify_polarity_many(scores.pll, q).astype(np.float64)
    days, codes = np.unique(scores.dates, return_inverse=True)
    sums = np.bincount(codes, weights=labels, minlength=days.size)
    if agg == "mean":
        counts = np.bincount(codes, minlength=days.size)
        values = sums / counts
    else:
        values = sums
    return PolarityIndex(dates=days.astype(np.int64), values=values, agg=agg)


def write_index_csv(index: PolarityIndex, path: str | Path) -> None:
    """Emit ``date,index``; sums are written as integers."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    as_int = index.agg == "sum"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "index"])
        for d, v in zip(index.dates, index.values):
            writer.writerow([format_ordinal(d), int(v) if as_int else repr(float(v))])


def load_index_csv(path: str | Path) -> PolarityIndex:
    """Read a ``date,index`` CSV back into a PolarityIndex."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputFormatError(f"{path}: empty file") from None
        if [h.strip().lower() for h in header[:2]] != ["date", "index"]:
            raise InputFormatError(f"{path}: expected header 'date,index'")
        dates: list[int] = []
        values: list[float] = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            ordinal = parse_iso_date(row[0])
            if ordinal is None:
                raise InputFormatError(f"{path}: bad date {row[0]!r}")
            dates.append(ordinal)
            values.append(float(row[1]))
    if not dates:
        raise NoParseableRowsError(f"{path}: no index rows")
    darr = np.array(dates, dtype=np.int64)
    if np.any(np.diff(darr) < 0):
        order = np.argsort(darr, kind="stable")
        darr = darr[order]
        values = [values[i] for i in order]
    if np.any(np.diff(darr) == 0):
        raise InputFormatError(f"{path}: duplicate dates in index")
    return PolarityIndex(dates=darr, values=np.array(values, dtype=np.float64))
