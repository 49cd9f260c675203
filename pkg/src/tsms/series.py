"""Univariate series container plus window, chunk, split and z-score helpers.

Positions are 0-based throughout; ``origin_index`` records where a segment
starts inside the series it was cut from.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSeries, RegionTooShort, SeriesTooShort

MIN_SERIES_LENGTH = 250


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    values: np.ndarray
    origin_index: int = 0

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.size == 0:
            raise ValueError("a TimeSeries needs at least one value")
        if not np.all(np.isfinite(arr)):
            raise ValueError("TimeSeries values must be finite")
        if self.origin_index < 0:
            raise ValueError("origin_index must be >= 0")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    def segment(self, start: int, stop: int) -> "TimeSeries":
        """Sub-series ``values[start:stop]`` with the origin shifted accordingly."""
        return TimeSeries(self.values[start:stop], self.origin_index + start)


@dataclass(frozen=True)
class SeriesSplit:
    train: TimeSeries
    val: TimeSeries
    test: TimeSeries
    boundaries: tuple[int, int]


@dataclass(frozen=True)
class Normalizer:
    mean: float
    std: float

    def apply(self, series: TimeSeries) -> TimeSeries:
        return TimeSeries((series.values - self.mean) / self.std, series.origin_index)

    def invert(self, series: TimeSeries) -> TimeSeries:
        return TimeSeries(series.values * self.std + self.mean, series.origin_index)

    def invert_values(self, values) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.std + self.mean


@dataclass(frozen=True)
class LagWindow:
    lags: np.ndarray
    label: np.ndarray
    t_end: int

    def __post_init__(self):
        object.__setattr__(self, "lags", _frozen(self.lags))
        object.__setattr__(self, "label", _frozen(self.label))


@dataclass(frozen=True)
class Chunk:
    values: np.ndarray
    label: np.ndarray
    chunk_index: int
    start: int = field(default=0)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "label", _frozen(self.label))


def split_series(series: TimeSeries) -> SeriesSplit:
    """50/25/25 train/validation/test split; the remainder goes to test."""
    n = len(series)
    if n < MIN_SERIES_LENGTH:
        raise SeriesTooShort(f"series has {n} values, need at least {MIN_SERIES_LENGTH}")
    cut1 = n // 2
    cut2 = cut1 + n // 4
    return SeriesSplit(
        train=series.segment(0, cut1),
        val=series.segment(cut1, cut2),
        test=series.segment(cut2, n),
        boundaries=(cut1, cut2),
    )


def fit_normalizer(train: TimeSeries) -> Normalizer:
    if len(train) < 2:
        raise DegenerateSeries("need at least two training values to fit a normalizer")
    mean = float(np.mean(train.values))
    std = float(np.std(train.values))
    if not std > 0.0:
        raise DegenerateSeries("training segment is constant")
    return Normalizer(mean, std)


def apply_normalizer(normalizer: Normalizer, series: TimeSeries) -> TimeSeries:
    return normalizer.apply(series)


def make_training_windows(series: TimeSeries, L: int, H: int) -> list[LagWindow]:
    """All step-1 (lags, label) pairs fully contained in ``series``."""
    n = len(series)
    if L < 1 or H < 1:
        raise ValueError("L and H must be positive")
    if n < L + H:
        raise SeriesTooShort(f"need at least L + H = {L + H} values, got {n}")
    v = series.values
    return [
        LagWindow(v[p : p + L], v[p + L : p + L + H], series.origin_index + p + L - 1)
        for p in range(n - L - H + 1)
    ]


def window_matrix(windows: list[LagWindow]) -> tuple[np.ndarray, np.ndarray]:
    """Stack windows into a lag matrix ``X`` (n, L) and target matrix ``Y`` (n, H)."""
    X = np.array([w.lags for w in windows], dtype=np.float64)
    Y = np.array([w.label for w in windows], dtype=np.float64)
    return X, Y


def make_chunks(region: TimeSeries, omega: int, H: int) -> list[Chunk]:
    """Tile ``region`` into non-overlapping chunks of ``omega`` values.

    Each chunk is followed by its ``H`` label values, which must still lie
    inside the region; a trailing remainder that cannot supply a label is
    dropped.
    """
    n = len(region)
    if n < omega + H:
        raise RegionTooShort(f"region of {n} values cannot hold a chunk of {omega} + {H}")
    n_chunks = (n - H) // omega
    v = region.values
    chunks = []
    for k in range(n_chunks):
        lo = k * omega
        chunks.append(Chunk(v[lo : lo + omega], v[lo + omega : lo + omega + H], k + 1, lo))
    return chunks
