"""Mean-shift drift detection with a Hoeffding bound.

The detector keeps a reference mean and compares it with the running mean of
everything observed since the reference window ended. When the gap exceeds
the Hoeffding bound for the current number of observations, a drift is
flagged and the observations since the old reference become the new one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateRange, InvalidParameters, NonFiniteObservation, ReferenceTooShort
from .series import TimeSeries

DEFAULT_SIGMA = 0.99


def hoeffding_bound(r: float, sigma: float, W: int) -> float:
    """sqrt(r^2 ln(2 / sigma) / (2 W))."""
    if not (W >= 1 and r > 0 and 0 < sigma < 1):
        raise InvalidParameters(f"need W >= 1, r > 0, 0 < sigma < 1; got W={W}, r={r}, sigma={sigma}")
    return math.sqrt(r * r * math.log(2.0 / sigma) / (2.0 * W))


@dataclass
class DriftEvent:
    t: int
    delta: float
    bound: float
    window: TimeSeries


@dataclass
class DriftState:
    mu0: float
    t_start: int
    t_end: int
    r: float
    sigma: float = DEFAULT_SIGMA
    range_hint: Optional[float] = None
    running_sum: float = 0.0
    count: int = 0
    last_delta: float = 0.0
    last_bound: float = math.inf
    _window: list = field(default_factory=list, repr=False)
    last_event: Optional[DriftEvent] = field(default=None, repr=False)

    @property
    def mean(self) -> float:
        return self.running_sum / self.count if self.count else self.mu0

    def pending(self) -> TimeSeries | None:
        """Observations since ``t_end`` that have not triggered a drift yet."""
        if not self._window:
            return None
        return TimeSeries(self._window, self.t_end + 1)

    def observe(self, value: float) -> bool:
        value = float(value)
        if not math.isfinite(value):
            raise NonFiniteObservation(f"observation {value!r} is not finite")
        self._window.append(value)
        self.running_sum += value
        self.count += 1
        # W is the number of observations since t_end, so the first one has W = 1
        W = self.count
        mu_j = self.running_sum / W
        self.last_delta = abs(mu_j - self.mu0)
        self.last_bound = hoeffding_bound(self.r, self.sigma, W)
        if not self.last_delta > self.last_bound:
            self.last_event = None
            return False
        j = self.t_end + W
        window = TimeSeries(self._window, self.t_end + 1)
        self.last_event = DriftEvent(j, self.last_delta, self.last_bound, window)
        self.mu0 = mu_j
        self.t_start, self.t_end = self.t_end + 1, j
        spread = float(np.max(window.values) - np.min(window.values))
        if spread > 0:
            self.r = spread
        elif self.range_hint is not None:
            self.r = self.range_hint
        self.running_sum = 0.0
        self.count = 0
        self._window = []
        return True


def init_detector(reference: TimeSeries, sigma: float = DEFAULT_SIGMA, range_hint: Optional[float] = None) -> DriftState:
    """Detector whose reference is ``reference`` (positions taken from its origin)."""
    values = reference.values if isinstance(reference, TimeSeries) else np.asarray(reference, dtype=np.float64)
    origin = reference.origin_index if isinstance(reference, TimeSeries) else 0
    if values.size < 2:
        raise ReferenceTooShort("the reference window needs at least two values")
    if not 0 < sigma < 1:
        raise InvalidParameters("sigma must lie in (0, 1)")
    if range_hint is not None:
        r = float(range_hint)
    else:
        r = float(np.max(values) - np.min(values))
    if not r > 0:
        raise DegenerateRange("reference window has zero range; pass range_hint")
    return DriftState(
        mu0=float(np.mean(values)),
        t_start=origin,
        t_end=origin + values.size - 1,
        r=r,
        sigma=sigma,
        range_hint=range_hint,
    )


def observe(state: DriftState, value: float) -> tuple[DriftState, bool]:
    return state, state.observe(value)
