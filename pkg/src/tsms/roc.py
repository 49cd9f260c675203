"""Regions of Competence: per-model banks of salient subsequences.

A region is cut into chunks, the best forecaster on each chunk is found, and
every lag window inside the chunk is explained with loss Shapley values of
that forecaster. Runs of at least three consecutive lags whose negated
attribution clears ``tau`` (i.e. lags that pushed the loss down) are stored
in that forecaster's region of competence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, PoolMismatch
from .series import Chunk, TimeSeries, make_chunks
from .shapley import BackgroundSet, Explanation, shapley_values
from .trees import predict

MIN_MEMBER_LENGTH = 3


@dataclass(frozen=True, eq=False)
class RoCMember:
    pattern: np.ndarray
    series_offset: int
    chunk_index: int
    window_index: int
    created_at: int = 0

    def __post_init__(self):
        p = np.array(self.pattern, dtype=np.float64)
        if p.ndim != 1 or p.size < MIN_MEMBER_LENGTH:
            raise ValueError(f"members need at least {MIN_MEMBER_LENGTH} values")
        p.setflags(write=False)
        object.__setattr__(self, "pattern", p)

    def __len__(self) -> int:
        return self.pattern.size

    def key(self) -> tuple:
        return (tuple(self.pattern.tolist()), self.series_offset, self.chunk_index, self.window_index, self.created_at)


@dataclass(frozen=True)
class RegionOfCompetence:
    model_id: int
    members: tuple[RoCMember, ...] = ()

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class RoCConfig:
    omega: int = 25
    tau: float = 0.01
    L: int = 15
    H: int = 1

    def __post_init__(self):
        if self.L < 1 or self.H < 1:
            raise ValueError("L and H must be positive")
        if self.omega < self.L + self.H:
            raise ValueError(f"omega={self.omega} must be at least L + H = {self.L + self.H}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")


@dataclass(frozen=True)
class ChunkTrace:
    chunk_index: int
    start: int
    best_model: int
    n_windows: int
    n_members: int


def best_forecaster_per_chunk(pool, chunk: Chunk, L: int) -> int:
    """Model id with the lowest squared error forecasting the chunk label from its last L values.

    Ties go to the lowest model id.
    """
    if chunk.values.size < L:
        raise DimensionMismatch(f"chunk of {chunk.values.size} values is shorter than L={L}")
    lags = chunk.values[-L:]
    best_id, best_err = None, np.inf
    for model in sorted(pool, key=lambda m: m.model_id):
        err = (predict(model, lags) - chunk.label[0]) ** 2
        if err < best_err:
            best_id, best_err = model.model_id, err
    return best_id


def salient_runs(phi, tau: float) -> list[tuple[int, int]]:
    """Half-open ``(start, stop)`` runs of lags with ``-phi >= tau`` and length >= 3."""
    s = -np.asarray(phi.phi if isinstance(phi, Explanation) else phi, dtype=np.float64)
    keep = s >= tau
    runs = []
    start = None
    for i, k in enumerate(keep.tolist() + [False]):
        if k and start is None:
            start = i
        elif not k and start is not None:
            if i - start >= MIN_MEMBER_LENGTH:
                runs.append((start, i))
            start = None
    return runs


def extract_salient_subsequences(window, phi, tau: float) -> list[np.ndarray]:
    window = np.asarray(window, dtype=np.float64)
    n_phi = len(phi.phi if isinstance(phi, Explanation) else phi)
    if n_phi != window.size:
        raise DimensionMismatch("one attribution per lag is required")
    return [window[a:b].copy() for a, b in salient_runs(phi, tau)]


def build_rocs(
    pool,
    region: TimeSeries,
    config: RoCConfig,
    background: BackgroundSet,
    created_at: int = 0,
    trace: Optional[list] = None,
    explain: Callable = shapley_values,
) -> list[RegionOfCompetence]:
    """Fresh regions of competence (one per pool member, in pool order) from ``region``.

    ``trace``, when given, receives one :class:`ChunkTrace` per chunk.
    """
    L, H = config.L, config.H
    chunks = make_chunks(region, config.omega, H)
    found: dict[int, list[RoCMember]] = {m.model_id: [] for m in pool}
    models = {m.model_id: m for m in pool}
    n_windows = config.omega - L - H + 1
    for chunk in chunks:
        winner = best_forecaster_per_chunk(pool, chunk, L)
        model = models[winner]
        added = 0
        for p in range(n_windows):
            lags = chunk.values[p : p + L]
            label = chunk.values[p + L : p + L + H]
            e = explain(model, background, lags, label, "loss")
            for a, b in salient_runs(e, config.tau):
                found[winner].append(
                    RoCMember(
                        lags[a:b].copy(),
                        region.origin_index + chunk.start + p + a,
                        chunk.chunk_index,
                        p,
                        created_at,
                    )
                )
                added += 1
        if trace is not None:
            trace.append(ChunkTrace(chunk.chunk_index, region.origin_index + chunk.start, winner, n_windows, added))
    return [RegionOfCompetence(m.model_id, tuple(found[m.model_id])) for m in pool]


def enrich_rocs(old: list[RegionOfCompetence], new: list[RegionOfCompetence]) -> list[RegionOfCompetence]:
    """Append each model's new members after its old ones."""
    if [r.model_id for r in old] != [r.model_id for r in new]:
        raise PoolMismatch("old and new regions must cover the same models in the same order")
    return [RegionOfCompetence(o.model_id, o.members + n.members) for o, n in zip(old, new)]


def roc_sizes(rocs: list[RegionOfCompetence]) -> list[int]:
    return [len(r) for r in rocs]
