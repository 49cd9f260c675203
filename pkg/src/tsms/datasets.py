"""Seeded synthetic series with injected regime changes.

Used for desk-scale benchmarks and tests; every generator is a pure function
of its arguments.
"""

from __future__ import annotations

import numpy as np

from .series import TimeSeries

REGIMES = ("level", "frequency", "amplitude", "trend", "pattern")


def seasonal_ar(n: int, rng: np.random.Generator, period: float, amplitude: float = 1.0, phi: float = 0.6, noise: float = 0.2) -> np.ndarray:
    t = np.arange(n)
    eps = np.zeros(n)
    shocks = rng.normal(scale=noise, size=n)
    for i in range(1, n):
        eps[i] = phi * eps[i - 1] + shocks[i]
    return amplitude * np.sin(2 * np.pi * t / period + rng.uniform(0, 2 * np.pi)) + eps


def regime_change_series(n: int = 500, seed: int = 0, regime: str | None = None, change_at: float | None = None) -> TimeSeries:
    """Seasonal AR series whose dynamics switch once, by default inside the last quarter."""
    rng = np.random.default_rng(seed)
    if regime is None:
        regime = REGIMES[int(rng.integers(len(REGIMES)))]
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    if change_at is None:
        change_at = rng.uniform(0.78, 0.88)
    cut = int(n * change_at)
    period = rng.uniform(8, 24)
    x = seasonal_ar(n, rng, period)
    tail = n - cut
    if regime == "level":
        x[cut:] += rng.choice([-1, 1]) * rng.uniform(1.0, 2.0)
    elif regime == "frequency":
        x[cut:] = seasonal_ar(tail, rng, period * rng.choice([0.5, 2.0]))
    elif regime == "amplitude":
        x[cut:] = seasonal_ar(tail, rng, period, amplitude=rng.uniform(1.8, 2.5))
    elif regime == "trend":
        x[cut:] += np.linspace(0, rng.choice([-1, 1]) * rng.uniform(1.5, 3.0), tail)
    else:
        saw = ((np.arange(tail) % period) / period - 0.5) * 2.5
        x[cut:] = saw + rng.normal(scale=0.2, size=tail)
    return TimeSeries(x)


def stitched_sine(
    n: int = 500, shift: float = 3.0, change_at: float = 0.8, period: float = 12.0, noise: float = 0.3, seed: int = 0
) -> TimeSeries:
    """A sine wave that jumps by ``shift`` at ``change_at`` of its length."""
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    x = np.sin(2 * np.pi * t / period) + rng.normal(scale=noise, size=n)
    x[int(n * change_at) :] += shift
    return TimeSeries(x)


def synthetic_corpus(count: int, seed: int = 0, n: int = 500) -> dict[str, TimeSeries]:
    """``count`` regime-change series cycling through every regime kind."""
    out = {}
    for i in range(count):
        regime = REGIMES[i % len(REGIMES)]
        out[f"synthetic-{i:02d}-{regime}"] = regime_change_series(n, seed=seed * 1000 + i, regime=regime)
    return out
