import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import best_double_split, best_single_split
from ssaam.cpd import (
    Signal,
    Trend,
    binseg,
    classify_trend,
    cost_l2,
    detect_regimes,
    regimes_from_breakpoints,
)
from ssaam.errors import InfeasibleBreakpointsError, InvalidSegmentError


def test_cost_constant_zero():
    assert cost_l2(Signal(np.full(6, 3.3)), 0, 6) == pytest.approx(0.0, abs=1e-12)


def test_cost_two_points():
    assert cost_l2(Signal(np.array([0.0, 2.0])), 0, 2) == pytest.approx(2.0, abs=1e-12)


def test_cost_hand_computed():
    sig = Signal(np.array([1.0, 1.0, 5.0, 5.0]))
    assert cost_l2(sig, 0, 4) == pytest.approx(16.0, abs=1e-12)
    assert cost_l2(sig, 0, 2) == pytest.approx(0.0, abs=1e-12)
    assert cost_l2(sig, 2, 4) == pytest.approx(0.0, abs=1e-12)


def test_cost_bad_range():
    sig = Signal(np.arange(4.0))
    with pytest.raises(InvalidSegmentError):
        cost_l2(sig, 2, 2)
    with pytest.raises(InvalidSegmentError):
        cost_l2(sig, 0, 5)


def test_binseg_single_step():
    sig = Signal(np.array([0.0] * 4 + [10.0] * 4))
    bkps = binseg(sig, n_bkps=1)
    assert bkps.indexes == (4,)
    assert best_single_split(sig.values) == 4


def test_binseg_two_steps():
    sig = Signal(np.array([0.0] * 3 + [3.0] * 3 + [9.0] * 3))
    bkps = binseg(sig, n_bkps=2)
    assert bkps.indexes == (3, 6)
    assert best_double_split(sig.values) == (3, 6)


def test_binseg_constant_zero_gain():
    sig = Signal(np.zeros(10))
    bkps = binseg(sig, n_bkps=1, min_size=2)
    assert bkps.indexes == (2,)
    assert bkps.zero_gain


def test_binseg_infeasible_count():
    with pytest.raises(InfeasibleBreakpointsError):
        binseg(Signal(np.arange(8.0)), n_bkps=4, min_size=2)


def test_binseg_single_split_matches_brute_force(rng):
    for _ in range(30):
        jump_at = int(rng.integers(3, 47))
        values = np.concatenate([np.zeros(jump_at), np.full(50 - jump_at, 6.0)])
        values += rng.normal(0, 1, size=50)
        got = binseg(Signal(values), n_bkps=1).indexes[0]
        assert got == best_single_split(values)


def test_binseg_nesting(rng):
    values = rng.normal(size=120) + np.repeat([0.0, 4.0, -3.0, 5.0], 30)
    prev = set()
    for k in range(1, 6):
        idx = set(binseg(Signal(values), n_bkps=k).indexes)
        assert prev <= idx
        prev = idx


def test_binseg_gain_nonnegative(rng):
    values = rng.normal(size=90) + np.repeat([0.0, 2.0, -1.0], 30)
    sig = Signal(values)
    bkps = binseg(sig, n_bkps=4)
    edges = bkps.boundaries
    scale = cost_l2(sig, 0, sig.n_samples)
    for split in bkps.indexes:
        a = max(e for e in edges if e < split)
        b = min(e for e in edges if e > split)
        # parent [a, b) was split at `split` at some iteration whose
        # boundaries were no tighter than these; the l2 gain of any split
        # is nonnegative regardless
        gain = cost_l2(sig, a, b) - cost_l2(sig, a, split) - cost_l2(sig, split, b)
        assert gain >= -1e-9 * (1.0 + scale)


def test_binseg_time_shift_equivariance():
    base = np.array([1.0] * 10 + [8.0] * 10)
    bkps = binseg(Signal(base), n_bkps=1).indexes
    for m in (1, 5, 13):
        shifted = np.concatenate([np.full(m, base[0]), base])
        got = binseg(Signal(shifted), n_bkps=1).indexes
        assert got == tuple(b + m for b in bkps)


def test_binseg_tie_break_earliest_segment():
    # two identical step segments: the first split lands in the left one
    values = np.array([0.0, 0.0, 5.0, 5.0, 0.0, 0.0, 5.0, 5.0])
    first = binseg(Signal(values), n_bkps=1).indexes[0]
    assert first == 2


def test_binseg_custom_cost_callable():
    def cost_l1(values, a, b):
        seg = values[a:b]
        return float(np.abs(seg - np.median(seg)).sum())

    values = np.array([0.0] * 5 + [9.0] * 5)
    bkps = binseg(Signal(values), n_bkps=1, cost=cost_l1)
    assert bkps.indexes == (5,)


def test_classify_trend():
    assert classify_trend(Signal(np.array([1.0, 2.0, 3.0])), 0, 3) is Trend.UP
    assert classify_trend(Signal(np.array([3.0, 2.0, 1.0])), 0, 3) is Trend.DOWN
    assert classify_trend(Signal(np.array([2.0, 2.0, 2.0])), 0, 3) is Trend.UP  # slope 0
    with pytest.raises(InvalidSegmentError):
        classify_trend(Signal(np.array([1.0, 2.0, 3.0])), 0, 1)


def test_regimes_tile_signal():
    sig = Signal(np.arange(10.0))
    from ssaam.cpd import Breakpoints

    regimes = regimes_from_breakpoints(sig, Breakpoints(indexes=(5,), n_samples=10))
    assert [(r.start, r.end) for r in regimes] == [(0, 5), (5, 10)]


def test_regimes_empty_breakpoints_single_regime():
    sig = Signal(np.arange(10.0))
    from ssaam.cpd import Breakpoints

    regimes = regimes_from_breakpoints(sig, Breakpoints(indexes=(), n_samples=10))
    assert [(r.start, r.end) for r in regimes] == [(0, 10)]


def test_detect_regimes_count(rng):
    values = rng.normal(size=200) + np.repeat([0.0, 5.0, -4.0, 3.0, 8.0], 40)
    regimes = detect_regimes(Signal(values), n_regimes=5)
    assert len(regimes) == 5
    assert regimes[0].start == 0 and regimes[-1].end == 200
    for a, b in zip(regimes[:-1], regimes[1:]):
        assert a.end == b.start


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=4, max_size=40))
def test_cost_nonnegative(values):
    sig = Signal(np.array(values, dtype=np.float64))
    n = sig.n_samples
    assert cost_l2(sig, 0, n) >= 0.0
    # splitting anywhere never increases total cost
    for s in range(1, n):
        assert cost_l2(sig, 0, s) + cost_l2(sig, s, n) <= cost_l2(sig, 0, n) + 1e-7 * (
            1 + cost_l2(sig, 0, n)
        )


def test_signal_validation():
    with pytest.raises(InvalidSegmentError):
        Signal(np.array([1.0]))
    with pytest.raises(InvalidSegmentError):
        Signal(np.array([1.0, np.inf]))
