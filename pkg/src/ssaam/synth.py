"""Deterministic synthetic dataset for end-to-end runs and demos.

Generates a weekday price history for a small stock universe plus a
per-sentence score file whose daily aggregate genuinely leads the market:
a latent daily mood follows an autoregression with regime-switching drift,
sentence scores scatter around it, and next-day market returns load on it.
Everything is a pure function of the seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .data import format_ordinal


@dataclass(frozen=True)
class SynthSpec:
    n_days: int = 1250
    n_assets: int = 10
    seed: int = 0
    start: str = "2015-01-02"
    min_sentences: int = 20
    max_sentences: int = 60
    regime_len_mean: int = 180


def weekday_calendar(start_iso: str, n_days: int) -> np.ndarray:
    """Day ordinals of the first n_days weekdays from start_iso on."""
    d = date.fromisoformat(start_iso)
    out = []
    while len(out) < n_days:
        if d.weekday() < 5:
            out.append(d.toordinal())
        d += timedelta(days=1)
    return np.array(out, dtype=np.int64)


def generate(spec: SynthSpec) -> dict:
    """Arrays for one synthetic market; see ``write_csvs`` for the files."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_days
    dates = weekday_calendar(spec.start, n)

    # regime-switching drift for the latent mood
    drift = np.empty(n)
    t = 0
    sign = 1.0
    while t < n:
        span = int(rng.integers(spec.regime_len_mean // 2, spec.regime_len_mean * 3 // 2))
        drift[t : t + span] = sign * 0.35
        sign = -sign
        t += span

    mood = np.empty(n)
    level = 0.0
    for i in range(n):
        level = 0.92 * level + drift[i] + rng.laplace(0.0, 0.8)
        mood[i] = level
    mood_z = (mood - mood.mean()) / mood.std()

    # sentence scores scatter around the day's mood
    counts = rng.integers(spec.min_sentences, spec.max_sentences + 1, size=n)
    total = int(counts.sum())
    pll = np.empty(total)
    day_of_row = np.repeat(np.arange(n), counts)
    pll = -35.0 + 2.2 * mood_z[day_of_row] + rng.laplace(0.0, 2.0, size=total)

    # next-day market returns load on the standardized mood
    betas = rng.uniform(0.7, 1.3, size=spec.n_assets)
    idio = rng.laplace(0.0, 0.008, size=(n, spec.n_assets))
    market = np.empty(n)
    market[0] = 0.0
    shock = rng.laplace(0.0, 0.006, size=n)
    for i in range(1, n):
        market[i] = 0.0007 + 0.0015 * mood_z[i - 1] + shock[i]
    returns = market[:, None] * betas[None, :] + idio + 0.0003
    start_prices = rng.uniform(20.0, 300.0, size=spec.n_assets)
    prices = start_prices[None, :] * np.cumprod(1.0 + returns, axis=0)

    tickers = tuple(f"AST{i:02d}" for i in range(spec.n_assets))
    return {
        "dates": dates,
        "tickers": tickers,
        "prices": prices,
        "pll": pll,
        "score_day": day_of_row,
        "mood": mood,
    }


def write_csvs(spec: SynthSpec, out_dir: str | Path) -> tuple[Path, Path]:
    """Write prices.csv and scores.csv; returns their paths."""
    data = generate(spec)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prices_path = out_dir / "prices.csv"
    scores_path = out_dir / "scores.csv"

    with prices_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", *data["tickers"]])
        for i, ordinal in enumerate(data["dates"]):
            writer.writerow([format_ordinal(ordinal)] + [f"{p:.6f}" for p in data["prices"][i]])

    with scores_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "sentence_id", "pll"])
        for row, day in enumerate(data["score_day"]):
            writer.writerow(
                [format_ordinal(data["dates"][day]), f"s{row:06d}", f"{data['pll'][row]:.6f}"]
            )
    return prices_path, scores_path
