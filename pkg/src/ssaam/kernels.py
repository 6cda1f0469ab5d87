"""Hot numeric kernels, numba-jitted with a pure-numpy fallback.

Three inner loops dominate the pipeline's runtime and live here:

* entropic-risk evaluation ``z * log(mean(exp(loss / z)) / alpha)`` minimized
  over ``z`` (called once per candidate portfolio, so grid oracles and the
  Frank-Wolfe fallback hit it millions of times),
* the split-point scan of binary segmentation,
* running-peak drawdown of an equity curve.

Backend selection: the numba implementations are used when numba imports and
the environment variable ``SSAAM_DISABLE_NUMBA`` is unset (or "0"/"false").
Both variants stay importable under explicit names (``evar_value_numpy``,
``evar_value_numba``, ...) so ``benchmarks/bench_kernels.py`` can time them
against each other; ``BACKEND`` reports which one the package dispatches to.

The two variants implement the same algorithm but do not promise bit-equal
floats (summation order differs); parity tests use tight relative tolerances.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "BACKEND",
    "NUMBA_AVAILABLE",
    "DISABLE_ENV",
    "evar_value",
    "evar_batch",
    "best_l2_split",
    "max_drawdown_path",
    "evar_value_numpy",
    "evar_batch_numpy",
    "best_l2_split_numpy",
    "max_drawdown_path_numpy",
]

DISABLE_ENV = "SSAAM_DISABLE_NUMBA"

# Inverse golden ratio; classic section-search constant.
_INVPHI = 0.6180339887498949
_GROW_LIMIT = 120
_GOLDEN_ITER = 160


def _numba_disabled() -> bool:
    return os.environ.get(DISABLE_ENV, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    from numba import njit, prange

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised via SSAAM_DISABLE_NUMBA instead
    NUMBA_AVAILABLE = False


# ---------------------------------------------------------------------------
# Entropic risk: value(z) = m + z * (log(sum(exp((l - m)/z))) - log(T*alpha))
# with m = max(l). The shifted form keeps every exponent <= 0, so the sum
# lies in [1, T] and never overflows. The function is convex in z > 0 with
# limit max(l) as z -> 0+, so the minimum is bracketed by growing the upper
# bound until the objective rises, then golden-section searched. The best
# value seen at ANY evaluation (including the z -> 0 boundary) is returned,
# which makes the boundary-optimal regime (alpha <= #max / T) exact.
# ---------------------------------------------------------------------------


def evar_value_numpy(losses: np.ndarray, alpha: float) -> tuple[float, float]:
    """Minimum of the entropic risk objective and its argmin z.

    Returns ``(value, z_star)``; ``z_star == 0.0`` flags a boundary optimum
    (the value is then ``max(losses)``, the z -> 0+ limit).
    """
    losses = np.asarray(losses, dtype=np.float64)
    t = losses.size
    m = float(losses.max())
    spread = m - float(losses.min())
    if spread == 0.0:
        return m, 0.0
    ln_t_alpha = math.log(t * alpha)

    def f(z: float) -> float:
        s = float(np.exp((losses - m) / z).sum())
        return m + z * (math.log(s) - ln_t_alpha)

    best_v = m
    best_z = 0.0

    def probe(z: float) -> float:
        nonlocal best_v, best_z
        v = f(z)
        if v < best_v:
            best_v, best_z = v, z
        return v

    a = spread * 1e-12
    b = spread
    fb = probe(b)
    for _ in range(_GROW_LIMIT):
        fb2 = probe(2.0 * b)
        if fb2 >= fb:
            b = 2.0 * b
            break
        b = 2.0 * b
        fb = fb2

    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1 = probe(x1)
    f2 = probe(x2)
    for _ in range(_GOLDEN_ITER):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = probe(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = probe(x2)
        if b - a <= 1e-13 * b:
            break
    return best_v, best_z


def evar_batch_numpy(returns: np.ndarray, weights: np.ndarray, alpha: float) -> np.ndarray:
    """Entropic risk of ``-returns @ w`` for every row ``w`` of ``weights``.

    Vectorized over the candidate grid: the bracket growth and the golden
    section run element-wise on (G,) arrays, one (G, T) exp per iteration.
    """
    returns = np.asarray(returns, dtype=np.float64)
    weights = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    big_l = -(weights @ returns.T)  # (G, T) losses
    t = returns.shape[0]
    m = big_l.max(axis=1)
    spread = m - big_l.min(axis=1)
    ln_t_alpha = math.log(t * alpha)
    shifted = big_l - m[:, None]

    def f(z: np.ndarray) -> np.ndarray:
        s = np.exp(shifted / z[:, None]).sum(axis=1)
        return m + z * (np.log(s) - ln_t_alpha)

    flat = spread == 0.0
    safe_spread = np.where(flat, 1.0, spread)

    best = m.copy()

    def probe(z: np.ndarray) -> np.ndarray:
        nonlocal best
        v = f(z)
        best = np.minimum(best, v)
        return v

    a = safe_spread * 1e-12
    b = safe_spread.copy()
    fb = probe(b)
    done = np.zeros(b.shape, dtype=bool)
    for _ in range(_GROW_LIMIT):
        b2 = 2.0 * b
        f2 = probe(b2)
        active = ~done
        # the bracket always extends to the probed point, even on the last step
        b = np.where(active, b2, b)
        done = done | (active & (f2 >= fb))
        fb = np.where(active & (f2 < fb), f2, fb)
        if done.all():
            break

    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1 = probe(x1)
    f2 = probe(x2)
    for _ in range(_GOLDEN_ITER):
        left = f1 <= f2
        a = np.where(left, a, x1)
        b = np.where(left, x2, b)
        xr = np.where(left, x1, x2)  # interior point carried over
        fr = np.where(left, f1, f2)
        xf = np.where(left, b - _INVPHI * (b - a), a + _INVPHI * (b - a))
        ff = probe(xf)
        x1 = np.where(left, xf, xr)
        f1 = np.where(left, ff, fr)
        x2 = np.where(left, xr, xf)
        f2 = np.where(left, fr, ff)
        if np.all(b - a <= 1e-13 * b):
            break
    return np.where(flat, m, best)


def best_l2_split_numpy(
    csum: np.ndarray, csum2: np.ndarray, start: int, end: int, min_size: int
) -> tuple[int, float]:
    """Best split of [start, end) under the piecewise-constant l2 cost.

    ``csum``/``csum2`` are prefix sums of the signal and its square with a
    leading zero. Returns ``(split, left_cost + right_cost)``; split is -1
    when the segment is too short. Ties go to the smallest index.
    """
    lo = start + min_size
    hi = end - min_size
    if hi < lo:
        return -1, math.inf
    s = np.arange(lo, hi + 1)
    nl = s - start
    nr = end - s
    sl = csum[s] - csum[start]
    sr = csum[end] - csum[s]
    total = (csum2[s] - csum2[start] - sl * sl / nl) + (csum2[end] - csum2[s] - sr * sr / nr)
    i = int(np.argmin(total))  # argmin takes the first minimum: smallest index
    return int(s[i]), float(total[i])


def max_drawdown_path_numpy(values: np.ndarray) -> float:
    """Worst peak-to-trough decline as a fraction <= 0."""
    values = np.asarray(values, dtype=np.float64)
    peaks = np.maximum.accumulate(values)
    return min(0.0, float(((values - peaks) / peaks).min()))


if NUMBA_AVAILABLE:

    @njit(cache=True)
    def _evar_obj_nb(losses, m, ln_t_alpha, z):
        s = 0.0
        for i in range(losses.shape[0]):
            s += math.exp((losses[i] - m) / z)
        return m + z * (math.log(s) - ln_t_alpha)

    @njit(cache=True)
    def evar_value_numba(losses, alpha):
        t = losses.shape[0]
        m = losses[0]
        lo_v = losses[0]
        for i in range(t):
            if losses[i] > m:
                m = losses[i]
            if losses[i] < lo_v:
                lo_v = losses[i]
        spread = m - lo_v
        if spread == 0.0:
            return m, 0.0
        ln_t_alpha = math.log(t * alpha)

        best_v = m
        best_z = 0.0

        a = spread * 1e-12
        b = spread
        fb = _evar_obj_nb(losses, m, ln_t_alpha, b)
        if fb < best_v:
            best_v = fb
            best_z = b
        for _ in range(_GROW_LIMIT):
            fb2 = _evar_obj_nb(losses, m, ln_t_alpha, 2.0 * b)
            if fb2 < best_v:
                best_v = fb2
                best_z = 2.0 * b
            if fb2 >= fb:
                b = 2.0 * b
                break
            b = 2.0 * b
            fb = fb2

        x1 = b - _INVPHI * (b - a)
        x2 = a + _INVPHI * (b - a)
        f1 = _evar_obj_nb(losses, m, ln_t_alpha, x1)
        if f1 < best_v:
            best_v = f1
            best_z = x1
        f2 = _evar_obj_nb(losses, m, ln_t_alpha, x2)
        if f2 < best_v:
            best_v = f2
            best_z = x2
        for _ in range(_GOLDEN_ITER):
            if f1 <= f2:
                b = x2
                x2 = x1
                f2 = f1
                x1 = b - _INVPHI * (b - a)
                f1 = _evar_obj_nb(losses, m, ln_t_alpha, x1)
                if f1 < best_v:
                    best_v = f1
                    best_z = x1
            else:
                a = x1
                x1 = x2
                f1 = f2
                x2 = a + _INVPHI * (b - a)
                f2 = _evar_obj_nb(losses, m, ln_t_alpha, x2)
                if f2 < best_v:
                    best_v = f2
                    best_z = x2
            if b - a <= 1e-13 * b:
                break
        return best_v, best_z

    @njit(cache=True, parallel=True)
    def evar_batch_numba(returns, weights, alpha):
        g = weights.shape[0]
        t = returns.shape[0]
        n = returns.shape[1]
        out = np.empty(g)
        for i in prange(g):
            losses = np.empty(t)
            for j in range(t):
                acc = 0.0
                for k in range(n):
                    acc += returns[j, k] * weights[i, k]
                losses[j] = -acc
            v, _ = evar_value_numba(losses, alpha)
            out[i] = v
        return out

    @njit(cache=True)
    def best_l2_split_numba(csum, csum2, start, end, min_size):
        lo = start + min_size
        hi = end - min_size
        best_s = -1
        best_total = math.inf
        for s in range(lo, hi + 1):
            nl = s - start
            nr = end - s
            sl = csum[s] - csum[start]
            sr = csum[end] - csum[s]
            total = (csum2[s] - csum2[start] - sl * sl / nl) + (
                csum2[end] - csum2[s] - sr * sr / nr
            )
            if total < best_total:
                best_total = total
                best_s = s
        return best_s, best_total

    @njit(cache=True)
    def max_drawdown_path_numba(values):
        peak = values[0]
        mdd = 0.0
        for i in range(values.shape[0]):
            v = values[i]
            if v > peak:
                peak = v
            dd = (v - peak) / peak
            if dd < mdd:
                mdd = dd
        return mdd


if NUMBA_AVAILABLE and not _numba_disabled():
    BACKEND = "numba"
    evar_value = evar_value_numba
    evar_batch = evar_batch_numba
    best_l2_split = best_l2_split_numba
    max_drawdown_path = max_drawdown_path_numba
else:
    BACKEND = "numpy"
    evar_value = evar_value_numpy
    evar_batch = evar_batch_numpy
    best_l2_split = best_l2_split_numpy
    max_drawdown_path = max_drawdown_path_numpy
