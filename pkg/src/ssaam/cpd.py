"""Greedy binary segmentation and regime labeling.

The segmenter repeatedly splits the segment whose best split yields the
largest cost reduction, stopping at a fixed breakpoint count. The default
cost is the piecewise-constant l2 cost (sum of squared deviations from the
segment mean); each regime then gets an up/down label from the sign of the
least-squares slope of the signal inside it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import InfeasibleBreakpointsError, InvalidSegmentError


class Trend(Enum):
    UP = "up"
    DOWN = "down"


@dataclass(frozen=True)
class Signal:
    """Ordered real samples to segment."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 2:
            raise InvalidSegmentError("signal needs at least 2 samples")
        if not np.isfinite(arr).all():
            raise InvalidSegmentError("signal must be finite")
        object.__setattr__(self, "values", arr)
        arr.flags.writeable = False

    @property
    def n_samples(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class Breakpoints:
    """Interior breakpoint indexes, strictly increasing in (0, S).

    ``zero_gain`` flags that at least one split was chosen while every
    candidate gain was numerically zero (splits then fall at the earliest
    valid index).
    """

    indexes: tuple[int, ...]
    n_samples: int
    zero_gain: bool = False

    @property
    def boundaries(self) -> tuple[int, ...]:
        """(0, ..., S): segment edges including both terminals."""
        return (0, *self.indexes, self.n_samples)


@dataclass(frozen=True)
class Regime:
    """Half-open sample range [start, end) with a trend label."""

    start: int
    end: int
    trend: Trend


CostFn = Callable[[np.ndarray, int, int], float]


def cost_l2(signal: Signal, a: int, b: int) -> float:
    """Sum of squared deviations from the mean over samples [a, b)."""
    if not (0 <= a < b <= signal.n_samples):
        raise InvalidSegmentError(f"bad segment [{a}, {b})")
    seg = signal.values[a:b]
    return float(((seg - seg.mean()) ** 2).sum())


@dataclass
class _Segment:
    start: int
    end: int
    split: int
    gain: float


def _prefix_sums(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    csum = np.concatenate(([0.0], np.cumsum(values)))
    csum2 = np.concatenate(([0.0], np.cumsum(values * values)))
    return csum, csum2


def _l2_from_prefix(csum: np.ndarray, csum2: np.ndarray, a: int, b: int) -> float:
    n = b - a
    s = csum[b] - csum[a]
    return float(csum2[b] - csum2[a] - s * s / n)


def binseg(
    signal: Signal,
    n_bkps: int,
    cost: str | CostFn = "l2",
    min_size: int = 2,
) -> Breakpoints:
    """Greedy binary segmentation to exactly ``n_bkps`` breakpoints.

    Each iteration scores every current segment by the gain of its best
    split (segment cost minus the minimal summed cost of the two halves)
    and splits the winner. Ties go to the smallest segment start, and
    within a segment to the smallest split index, so a constant signal
    splits at ``min_size`` (with the zero-gain flag set).

    Raises InfeasibleBreakpointsError when the count cannot be reached,
    either upfront (n_bkps > S / min_size - 1) or because the greedy
    sequence ran out of segments of length >= 2 * min_size.
    """
    s_total = signal.n_samples
    if min_size < 1:
        raise InvalidSegmentError("min_size must be >= 1")
    if n_bkps < 1:
        raise InfeasibleBreakpointsError("n_bkps must be >= 1")
    if n_bkps > s_total / min_size - 1:
        raise InfeasibleBreakpointsError(
            f"cannot place {n_bkps} breakpoints in {s_total} samples with min_size={min_size}"
        )

    use_l2 = isinstance(cost, str)
    if use_l2:
        if cost != "l2":
            raise ValueError(f"unknown cost {cost!r}")
        csum, csum2 = _prefix_sums(signal.values)

        def seg_cost(a: int, b: int) -> float:
            return _l2_from_prefix(csum, csum2, a, b)

        def best_split(a: int, b: int) -> tuple[int, float]:
            return kernels.best_l2_split(csum, csum2, a, b, min_size)

    else:

        def seg_cost(a: int, b: int) -> float:
            return cost(signal.values, a, b)

        def best_split(a: int, b: int) -> tuple[int, float]:
            best_s, best_total = -1, np.inf
            for split in range(a + min_size, b - min_size + 1):
                total = cost(signal.values, a, split) + cost(signal.values, split, b)
                if total < best_total:
                    best_s, best_total = split, total
            return best_s, best_total

    atol = 1e-12 * (1.0 + abs(seg_cost(0, s_total)))

    def make_segment(a: int, b: int) -> _Segment:
        split, children = best_split(a, b)
        gain = seg_cost(a, b) - children if split >= 0 else -np.inf
        return _Segment(start=a, end=b, split=split, gain=gain)

    segments = [make_segment(0, s_total)]
    bkps: list[int] = []
    zero_gain = False
    while len(bkps) < n_bkps:
        winner = None
        for seg in segments:  # scan order keeps the smallest-start tie-break
            if seg.split < 0:
                continue
            if winner is None or seg.gain > winner.gain:
                winner = seg
        if winner is None:
            raise InfeasibleBreakpointsError(
                f"greedy splitting exhausted after {len(bkps)} of {n_bkps} breakpoints"
            )
        if winner.gain <= atol:
            zero_gain = True
        bkps.append(winner.split)
        i = segments.index(winner)
        segments[i : i + 1] = [
            make_segment(winner.start, winner.split),
            make_segment(winner.split, winner.end),
        ]
    return Breakpoints(indexes=tuple(sorted(bkps)), n_samples=s_total, zero_gain=zero_gain)


def classify_trend(signal: Signal, start: int, end: int) -> Trend:
    """Up/down from the OLS slope of value on sample index; slope 0 is Up."""
    if end - start < 2:
        raise InvalidSegmentError("trend needs at least 2 samples")
    seg = signal.values[start:end]
    x = np.arange(seg.size, dtype=np.float64)
    slope = float(np.cov(x, seg, bias=True)[0, 1] / np.var(x))
    return Trend.UP if slope >= 0.0 else Trend.DOWN


def regimes_from_breakpoints(
    signal: Signal, bkps: Breakpoints, n_regimes: int | None = None
) -> list[Regime]:
    """Contiguous regimes tiling [0, S), each labeled by classify_trend."""
    edges = bkps.boundaries
    if n_regimes is not None and len(edges) - 1 != n_regimes:
        raise InvalidSegmentError(
            f"breakpoints give {len(edges) - 1} regimes, expected {n_regimes}"
        )
    return [
        Regime(start=a, end=b, trend=classify_trend(signal, a, b))
        for a, b in zip(edges[:-1], edges[1:])
    ]


def detect_regimes(signal: Signal, n_regimes: int, min_size: int = 2) -> list[Regime]:
    """Segment into ``n_regimes`` trend-labeled regimes (n_regimes - 1 splits)."""
    if n_regimes < 1:
        raise InfeasibleBreakpointsError("n_regimes must be >= 1")
    if n_regimes == 1:
        return [Regime(start=0, end=signal.n_samples, trend=classify_trend(signal, 0, signal.n_samples))]
    bkps = binseg(signal, n_bkps=n_regimes - 1, min_size=min_size)
    return regimes_from_breakpoints(signal, bkps, n_regimes)


def write_regimes_csv(regimes: Sequence[Regime], dates: np.ndarray, path) -> None:
    """Emit ``start_date,end_date,trend`` with an inclusive end date."""
    import csv
    from pathlib import Path

    from .data import format_ordinal

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["start_date", "end_date", "trend"])
        for regime in regimes:
            writer.writerow(
                [
                    format_ordinal(dates[regime.start]),
                    format_ordinal(dates[regime.end - 1]),
                    regime.trend.value,
                ]
            )
