"""Online model selection by DTW distance to regions of competence.

At every test step the window of the L true observations preceding the
target is compared with every RoC member; the model owning the closest
member forecasts. The adaptive variant feeds each revealed value to a
drift detector and, on drift, builds regions from the observations since
the last reference window and appends them to the existing ones. The
periodic variant rebuilds at ten equally spaced test positions; the static
variant never rebuilds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .drift import DriftState, init_detector
from .dtw import dtw_many, pack
from .errors import NoModelsAvailable, UnsupportedHorizon
from .roc import RegionOfCompetence, RoCConfig, RoCMember, build_rocs, enrich_rocs, roc_sizes
from .series import SeriesSplit, TimeSeries
from .shapley import BackgroundSet, Explanation, shapley_values
from .trees import StabilityIntervals, predict, stability_intervals

log = logging.getLogger(__name__)

VARIANT_KINDS = ("adaptive", "static", "periodic")


@dataclass(frozen=True)
class SelectionVariant:
    kind: str = "adaptive"
    periodic_updates: int = 10
    # a drift region too short to rebuild from is kept and prepended to the next one;
    # False drops it, so later rebuilds only see data since the latest detector reset
    carry_skipped: bool = True

    def __post_init__(self):
        if self.kind not in VARIANT_KINDS:
            raise ValueError(f"variant must be one of {VARIANT_KINDS}")
        if self.kind == "periodic" and self.periodic_updates < 1:
            raise ValueError("periodic_updates must be >= 1")


@dataclass
class Evidence:
    model_id: int
    distance: float
    member: Optional[RoCMember]
    per_model: dict[int, float]
    runner_up: tuple[Optional[int], float]
    furthest_member: Optional[RoCMember] = None
    furthest_distance: float = float("nan")
    fallback: bool = False


class PackedRoCs:
    """All RoC members flattened once so a step costs a single DTW sweep."""

    def __init__(self, rocs: list[RegionOfCompetence]):
        self.rocs = rocs
        self.members = [m for r in rocs for m in r.members]
        self.bounds = []
        pos = 0
        for r in rocs:
            self.bounds.append((r.model_id, pos, pos + len(r.members)))
            pos += len(r.members)
        if self.members:
            self.flat, self.offsets = pack([m.pattern for m in self.members])

    def select(self, window, fallback: Optional[int] = None) -> Evidence:
        if not self.members:
            if fallback is None:
                raise NoModelsAvailable("every RoC is empty and no fallback model is configured")
            return Evidence(fallback, float("inf"), None, {r.model_id: float("inf") for r in self.rocs}, (None, float("inf")), fallback=True)
        dist = dtw_many(window, self.flat, self.offsets)
        per_model: dict[int, float] = {}
        best: list[tuple[float, int, int]] = []
        for model_id, lo, hi in self.bounds:
            if hi == lo:
                per_model[model_id] = float("inf")
                continue
            i = lo + int(np.argmin(dist[lo:hi]))
            per_model[model_id] = float(dist[i])
            best.append((float(dist[i]), model_id, i))
        best.sort(key=lambda b: (b[0], b[1]))
        d, model_id, i = best[0]
        runner = (best[1][1], best[1][0]) if len(best) > 1 else (None, float("inf"))
        lo, hi = next((lo, hi) for mid, lo, hi in self.bounds if mid == model_id)
        far = lo + int(np.argmax(dist[lo:hi]))
        return Evidence(model_id, d, self.members[i], per_model, runner, self.members[far], float(dist[far]))


def select_model(rocs: list[RegionOfCompetence], window, fallback: Optional[int] = None) -> tuple[int, Evidence]:
    """Model whose RoC holds the member closest to ``window`` under DTW.

    Ties go to the lowest model id. With every RoC empty the ``fallback``
    model is returned and the evidence is flagged.
    """
    ev = PackedRoCs(rocs).select(window, fallback)
    return ev.model_id, ev


@dataclass
class RebuildEvent:
    t: int
    reason: str
    region_start: int
    region_stop: int
    skipped: bool
    sizes_before: list[int]
    sizes_after: list[int]
    rocs_before: list[RegionOfCompetence] = field(repr=False, default_factory=list)
    rocs_after: list[RegionOfCompetence] = field(repr=False, default_factory=list)
    pre_closest: Optional[Evidence] = field(repr=False, default=None)
    post_closest: Optional[Evidence] = field(repr=False, default=None)


@dataclass
class SelectionRecord:
    t: int
    chosen_model: int
    min_distance: float
    closest_member: Optional[RoCMember]
    runner_up: tuple[Optional[int], float]
    drift_fired: bool
    forecast: np.ndarray
    actual: np.ndarray
    attributions: Optional[Explanation] = None
    fallback: bool = False
    furthest_member: Optional[RoCMember] = None
    max_distance: float = float("nan")
    drift_delta: Optional[float] = None
    drift_bound: Optional[float] = None
    stability: Optional[StabilityIntervals] = None
    rebuild: Optional[RebuildEvent] = None
    window: Optional[np.ndarray] = None


@dataclass
class OnlineRun:
    forecasts: np.ndarray
    actuals: np.ndarray
    records: list[SelectionRecord]
    rebuilds: list[RebuildEvent]
    initial_rocs: list[RegionOfCompetence]
    final_rocs: list[RegionOfCompetence]
    size_history: list[list[int]]


def periodic_positions(n_test: int, updates: int = 10) -> list[int]:
    """Test-relative counts of revealed observations after which a periodic rebuild runs."""
    return [(i * n_test) // updates for i in range(1, updates + 1)]


def run_online(
    pool,
    initial_rocs: list[RegionOfCompetence],
    full_series: TimeSeries,
    split: SeriesSplit,
    variant: SelectionVariant,
    config: RoCConfig,
    background: BackgroundSet,
    detector: Optional[DriftState] = None,
    fallback: Optional[int] = None,
    sigma: float = 0.99,
    explain: bool = False,
) -> OnlineRun:
    """One-step-ahead rolling forecast over the test region.

    Only regions of competence change during the run; models are never
    refit. With ``explain`` each record also carries the chosen model's
    prediction attributions and stability intervals.
    """
    if config.H != 1:
        raise UnsupportedHorizon("the online loop forecasts H = 1 only")
    L, H = config.L, config.H
    series = full_series.values
    test_start = split.test.origin_index - full_series.origin_index
    n_test = len(split.test)
    if test_start < L:
        raise ValueError("not enough history before the test region to form a window")
    if variant.kind == "adaptive" and detector is None:
        detector = init_detector(split.val, sigma)
    models = {m.model_id: m for m in pool}
    period_at = set(periodic_positions(n_test, variant.periodic_updates)) if variant.kind == "periodic" else set()
    last_rebuild = 0
    skipped = 0
    # first series index not yet covered by any drift rebuild region
    pending_from = split.val.origin_index + len(split.val)

    rocs = list(initial_rocs)
    packed = PackedRoCs(rocs)
    records: list[SelectionRecord] = []
    rebuilds: list[RebuildEvent] = []
    history = [roc_sizes(rocs)]
    forecasts = np.empty(n_test)
    actuals = np.empty(n_test)

    for step in range(n_test):
        t = test_start + step
        window = series[t - L : t]
        ev = packed.select(window, fallback)
        model = models[ev.model_id]
        yhat = predict(model, window)
        actual = series[t : t + H]
        forecasts[step] = yhat
        actuals[step] = actual[0]
        rec = SelectionRecord(
            t=t,
            chosen_model=ev.model_id,
            min_distance=ev.distance,
            closest_member=ev.member,
            runner_up=ev.runner_up,
            drift_fired=False,
            forecast=np.array([yhat]),
            actual=np.array(actual),
            fallback=ev.fallback,
            furthest_member=ev.furthest_member,
            max_distance=ev.furthest_distance,
            window=np.array(window),
        )
        if explain:
            rec.attributions = shapley_values(model, background, window, kind="prediction")
            rec.stability = stability_intervals(model, window)
        records.append(rec)

        region = None
        reason = None
        if variant.kind == "adaptive":
            fired = detector.observe(actual[0])
            rec.drift_fired = fired
            rec.drift_delta = detector.last_delta if not fired else detector.last_event.delta
            rec.drift_bound = detector.last_bound if not fired else detector.last_event.bound
            if fired:
                region = detector.last_event.window
                if variant.carry_skipped and pending_from < region.origin_index:
                    region = full_series.segment(pending_from, region.origin_index + len(region))
                reason = "drift"
        elif variant.kind == "periodic" and (step + 1) in period_at:
            stop = t + 1
            start = test_start + last_rebuild
            start = min(start, stop - (config.omega + H))
            region = full_series.segment(start, stop)
            reason = "periodic"
            last_rebuild = step + 1

        if region is not None:
            region_start = region.origin_index
            region_stop = region_start + len(region)
            before = roc_sizes(rocs)
            if len(region) < config.omega + H:
                log.debug(
                    "skipping RoC rebuild at t=%d: region of %d values is shorter than omega + H = %d",
                    t, len(region), config.omega + H,
                )
                skipped += 1
                rec.rebuild = RebuildEvent(t, reason, region_start, region_stop, True, before, before)
                continue
            if reason == "drift":
                pending_from = region_stop
            new = build_rocs(pool, region, config, background, created_at=t)
            old = rocs
            rocs = enrich_rocs(rocs, new)
            new_packed = PackedRoCs(rocs)
            next_window = series[t + 1 - L : t + 1]
            event = RebuildEvent(
                t, reason, region_start, region_stop, False, before, roc_sizes(rocs),
                rocs_before=old, rocs_after=rocs,
                pre_closest=packed.select(next_window, fallback),
                post_closest=new_packed.select(next_window, fallback),
            )
            packed = new_packed
            rec.rebuild = event
            rebuilds.append(event)
            history.append(roc_sizes(rocs))

    if skipped:
        log.warning("%d RoC rebuild(s) skipped: region shorter than omega + H = %d", skipped, config.omega + H)
    return OnlineRun(forecasts, actuals, records, rebuilds, list(initial_rocs), rocs, history)
