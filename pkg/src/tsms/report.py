"""Line-oriented JSON explanation reports.

Schema ``tsms-explanation-report`` version 1. Every line is one JSON object
with a ``type`` key:

``header``
    schema, version, L, model list, fallback model, variant.
``roc_snapshot``
    ``phase`` (``initial``, ``before`` or ``after``), ``t`` and
    ``rocs``: one ``{"model_id", "members"}`` entry per model.
``step``
    chosen model, closest / furthest member of the chosen model's region
    with DTW distances, runner-up, forecast, actual, drift statistics,
    prediction attributions (``phi``, ``base_value``) and stability
    intervals (``lo``, ``hi``; ``null`` means unbounded).
``rebuild``
    reason, region bounds, RoC sizes before/after and the closest member
    for the next window under the old and the new regions.

Keys are written in a fixed order and floats use shortest round-trip
formatting, so identical runs produce identical files. A rebuild line is
followed by its ``before`` and ``after`` snapshots and precedes the next
step line.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Optional

from .roc import RegionOfCompetence, RoCMember
from .selector import Evidence, SelectionRecord

SCHEMA = "tsms-explanation-report"
VERSION = 1


def _num(x) -> Optional[float]:
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _member(m: Optional[RoCMember], distance=None) -> Optional[dict]:
    if m is None:
        return None
    out = {
        "pattern": m.pattern.tolist(),
        "series_offset": m.series_offset,
        "chunk_index": m.chunk_index,
        "window_index": m.window_index,
        "created_at": m.created_at,
    }
    if distance is not None:
        out["distance"] = _num(distance)
    return out


def _evidence(ev: Optional[Evidence]) -> Optional[dict]:
    if ev is None:
        return None
    return {"model": ev.model_id, "distance": _num(ev.distance), "fallback": ev.fallback, "member": _member(ev.member)}


def _snapshot(phase: str, t: int, rocs: Iterable[RegionOfCompetence]) -> dict:
    return {
        "type": "roc_snapshot",
        "phase": phase,
        "t": t,
        "rocs": [{"model_id": r.model_id, "members": [_member(m) for m in r.members]} for r in rocs],
    }


def _step(rec: SelectionRecord) -> dict:
    out = {
        "type": "step",
        "t": rec.t,
        "chosen_model": rec.chosen_model,
        "min_distance": _num(rec.min_distance),
        "fallback": rec.fallback,
        "closest": _member(rec.closest_member, rec.min_distance),
        "furthest": _member(rec.furthest_member, rec.max_distance),
        "runner_up": {"model": rec.runner_up[0], "distance": _num(rec.runner_up[1])},
        "window": None if rec.window is None else rec.window.tolist(),
        "forecast": rec.forecast.tolist(),
        "actual": rec.actual.tolist(),
        "drift_fired": rec.drift_fired,
        "drift_delta": _num(rec.drift_delta),
        "drift_bound": _num(rec.drift_bound),
        "attributions": None,
        "stability": None,
    }
    if rec.attributions is not None:
        out["attributions"] = {
            "kind": rec.attributions.kind,
            "phi": rec.attributions.phi.tolist(),
            "base_value": rec.attributions.base_value,
        }
    if rec.stability is not None:
        out["stability"] = {
            "lo": [_num(v) for v in rec.stability.lo],
            "hi": [_num(v) for v in rec.stability.hi],
        }
    return out


def _rebuild(rec: SelectionRecord) -> dict:
    ev = rec.rebuild
    return {
        "type": "rebuild",
        "t": ev.t,
        "reason": ev.reason,
        "region": [ev.region_start, ev.region_stop],
        "skipped": ev.skipped,
        "sizes_before": ev.sizes_before,
        "sizes_after": ev.sizes_after,
        "pre_closest": _evidence(ev.pre_closest),
        "post_closest": _evidence(ev.post_closest),
    }


def emit_explanation_report(
    records: list[SelectionRecord],
    rocs: list[RegionOfCompetence],
    path,
    *,
    L: Optional[int] = None,
    fallback: Optional[int] = None,
    variant: Optional[str] = None,
    models: Optional[list[dict]] = None,
) -> Path:
    """Write ``records`` (and the initial ``rocs``) to ``path``."""
    if not records:
        raise ValueError("an explanation report needs at least one record")
    if L is None:
        L = len(records[0].window) if records[0].window is not None else None
    lines = [
        {
            "type": "header",
            "schema": SCHEMA,
            "version": VERSION,
            "L": L,
            "variant": variant,
            "fallback_model": fallback,
            "models": models or [{"model_id": r.model_id} for r in rocs],
            "n_steps": len(records),
        },
        _snapshot("initial", records[0].t, rocs),
    ]
    for rec in records:
        lines.append(_step(rec))
        if rec.rebuild is not None:
            lines.append(_rebuild(rec))
            if not rec.rebuild.skipped:
                lines.append(_snapshot("before", rec.t, rec.rebuild.rocs_before))
                lines.append(_snapshot("after", rec.t, rec.rebuild.rocs_after))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for line in lines:
            fh.write(json.dumps(line, allow_nan=False))
            fh.write("\n")
    return path


def read_explanation_report(path) -> dict:
    """Parse a report into ``header``, ``steps``, ``rebuilds`` and ``snapshots`` lists."""
    out = {"header": None, "steps": [], "rebuilds": [], "snapshots": []}
    with open(path) as fh:
        for n, line in enumerate(fh, start=1):
            entry = json.loads(line)
            kind = entry.get("type")
            if kind == "header":
                if entry.get("schema") != SCHEMA or entry.get("version") != VERSION:
                    raise ValueError(f"{path}: unsupported report schema")
                out["header"] = entry
            elif kind == "step":
                out["steps"].append(entry)
            elif kind == "rebuild":
                out["rebuilds"].append(entry)
            elif kind == "roc_snapshot":
                out["snapshots"].append(entry)
            else:
                raise ValueError(f"{path}:{n}: unknown entry type {kind!r}")
    if out["header"] is None:
        raise ValueError(f"{path}: missing header line")
    return out
