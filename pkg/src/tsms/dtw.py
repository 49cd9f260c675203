"""Dynamic Time Warping with squared local cost and no warping window."""

from __future__ import annotations

import numba
import numpy as np

from .errors import EmptySequence


@numba.njit(cache=True)
def _dtw(a, b):
    n = a.size
    m = b.size
    prev = np.full(m + 1, np.inf)
    cur = np.empty(m + 1)
    prev[0] = 0.0
    for i in range(1, n + 1):
        cur[0] = np.inf
        ai = a[i - 1]
        for j in range(1, m + 1):
            d = ai - b[j - 1]
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = d * d + best
        for j in range(m + 1):
            prev[j] = cur[j]
    return prev[m]


@numba.njit(cache=True)
def _dtw_many(query, flat, offsets):
    out = np.empty(offsets.size - 1)
    for r in range(offsets.size - 1):
        out[r] = _dtw(query, flat[offsets[r] : offsets[r + 1]])
    return out


def dtw_distance(a, b) -> float:
    """Accumulated squared-cost DTW between ``a`` and ``b`` (no root, no normalization)."""
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1)
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise EmptySequence("DTW needs two non-empty sequences")
    return float(_dtw(a, b))


def pack(sequences) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate variable-length sequences into ``(flat, offsets)`` for :func:`dtw_many`."""
    lengths = [len(s) for s in sequences]
    if any(n == 0 for n in lengths):
        raise EmptySequence("cannot pack an empty sequence")
    offsets = np.zeros(len(lengths) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    flat = np.concatenate([np.asarray(s, dtype=np.float64) for s in sequences]) if sequences else np.zeros(0)
    return flat, offsets


def dtw_many(query, flat: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """DTW from ``query`` to every packed sequence."""
    q = np.ascontiguousarray(query, dtype=np.float64).reshape(-1)
    if q.size == 0:
        raise EmptySequence("DTW needs a non-empty query")
    return _dtw_many(q, flat, offsets)
