"""Dataset ingestion, experiment orchestration and RMSE ranking."""

from __future__ import annotations

import glob
import hashlib
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from . import datasets
from .errors import ConfigError, IncompleteTable, ParseError, SeriesTooShort, TSMSError
from .roc import RoCConfig, build_rocs
from .selector import OnlineRun, SelectionVariant, run_online
from .series import (
    MIN_SERIES_LENGTH,
    Normalizer,
    SeriesSplit,
    TimeSeries,
    fit_normalizer,
    make_training_windows,
    split_series,
)
from .shapley import BackgroundSet, make_background
from .trees import ModelPool, build_model_pool, rmse

log = logging.getLogger(__name__)

MAX_SERIES_LENGTH = 500
REFERENCE_METHOD = "TSMS"
VARIANT_METHODS = {"adaptive": "TSMS", "static": "TSMS-St", "periodic": "TSMS-Per"}
BEST_SINGLE = "Best-Single"


# --------------------------------------------------------------------------- config


@dataclass
class RunConfig:
    datasets: list[str] = field(default_factory=list)
    synthetic: int = 0
    seed: int = 0
    L: int = 15
    H: int = 1
    omega: int = 25
    tau: float = 0.01
    sigma: float = 0.99
    variants: tuple[str, ...] = ("adaptive", "static", "periodic")
    periodic_updates: int = 10
    background_cap: Optional[int] = 25
    learning_rate: float = 0.1
    output_dir: str = "tsms-output"
    original_scale: bool = False

    def __post_init__(self):
        self.variants = tuple(self.variants)
        self.validate()

    def validate(self) -> None:
        try:
            RoCConfig(self.omega, self.tau, self.L, self.H)
            for v in self.variants:
                SelectionVariant(v, self.periodic_updates)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.H != 1:
            raise ConfigError("only H = 1 is supported")
        if not 0 < self.sigma < 1:
            raise ConfigError("sigma must lie in (0, 1)")
        if not 0 < self.learning_rate <= 1:
            raise ConfigError("learning_rate must lie in (0, 1]")
        if self.background_cap is not None and self.background_cap < 1:
            raise ConfigError("background_cap must be positive (or 'all')")
        if self.synthetic < 0:
            raise ConfigError("synthetic must be >= 0")

    @property
    def roc_config(self) -> RoCConfig:
        return RoCConfig(self.omega, self.tau, self.L, self.H)

    def fingerprint(self) -> str:
        d = asdict(self)
        d.pop("output_dir")
        d["variants"] = list(d["variants"])
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        """Parse a flat ``key = value`` file; ``#`` starts a comment.

        ``datasets`` is a comma-separated list of files, directories or glob
        patterns, resolved relative to the config file.
        """
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        raw: dict[str, str] = {}
        for n, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            raw[key] = value
        return cls.from_mapping(raw, base_dir=path.parent)

    @classmethod
    def from_mapping(cls, raw: dict[str, str], base_dir=".") -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        aliases = {"ω": "omega", "τ": "tau", "σ": "sigma", "variant": "variants"}
        kwargs = {}
        try:
            for key, value in raw.items():
                key = aliases.get(key, key)
                if key not in known:
                    raise ConfigError(f"unknown config key {key!r}")
                if key == "datasets":
                    kwargs[key] = _expand_datasets(value, Path(base_dir))
                elif key == "variants":
                    kwargs[key] = tuple(v.strip() for v in value.split(",") if v.strip())
                elif key == "background_cap":
                    kwargs[key] = None if value.lower() in ("all", "none") else int(value)
                elif key == "original_scale":
                    kwargs[key] = value.lower() in ("1", "true", "yes", "on")
                elif key in ("tau", "sigma", "learning_rate"):
                    kwargs[key] = float(value)
                elif key == "output_dir":
                    out = Path(value)
                    kwargs[key] = str(out if out.is_absolute() else Path(base_dir) / out)
                else:
                    kwargs[key] = int(value)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return cls(**kwargs)


def _expand_datasets(value: str, base: Path) -> list[str]:
    paths: list[str] = []
    for item in (s.strip() for s in value.split(",")):
        if not item:
            continue
        p = Path(item)
        if not p.is_absolute():
            p = base / p
        if p.is_dir():
            paths.extend(sorted(str(q) for q in p.iterdir() if q.suffix in (".csv", ".txt")))
        elif any(c in item for c in "*?["):
            paths.extend(sorted(glob.glob(str(p))))
        else:
            paths.append(str(p))
    return paths


# --------------------------------------------------------------------------- ingestion


def load_dataset_csv(path, seed: int = 0) -> TimeSeries:
    """One value per line, optional header line; long series are cut to a seeded 500-value slice."""
    values: list[float] = []
    with open(path) as fh:
        for n, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                v = float(text)
            except ValueError:
                if n == 1:
                    continue
                raise ParseError(f"not a number: {text!r}", n) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {text!r}", n)
            values.append(v)
    return prepare_series(values, seed)


def prepare_series(values, seed: int = 0) -> TimeSeries:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < MIN_SERIES_LENGTH:
        raise SeriesTooShort(f"series has {arr.size} values, need at least {MIN_SERIES_LENGTH}")
    if arr.size > MAX_SERIES_LENGTH:
        start = int(np.random.default_rng(seed).integers(0, arr.size - MAX_SERIES_LENGTH + 1))
        arr = arr[start : start + MAX_SERIES_LENGTH]
    return TimeSeries(arr)


# --------------------------------------------------------------------------- per dataset


@dataclass
class PreparedDataset:
    name: str
    raw: TimeSeries
    normalizer: Normalizer
    series: TimeSeries
    split: SeriesSplit
    pool: ModelPool
    background: BackgroundSet
    val_rmse: list[float]
    fallback: int


def validation_windows(series: TimeSeries, split: SeriesSplit, L: int) -> tuple[np.ndarray, np.ndarray]:
    start = split.val.origin_index - series.origin_index
    stop = start + len(split.val)
    v = series.values
    X = np.array([v[t - L : t] for t in range(max(start, L), stop)])
    return X, v[max(start, L) : stop]


def holdout_windows(series: TimeSeries, split: SeriesSplit, L: int) -> tuple[np.ndarray, np.ndarray]:
    start = split.test.origin_index - series.origin_index
    v = series.values
    X = np.array([v[t - L : t] for t in range(start, len(v))])
    return X, v[start:]


def prepare_dataset(name: str, raw: TimeSeries, config: RunConfig) -> PreparedDataset:
    """Split, normalize with train statistics, fit the pool and pick the fallback model."""
    raw_split = split_series(raw)
    normalizer = fit_normalizer(raw_split.train)
    series = normalizer.apply(raw)
    split = split_series(series)
    windows = make_training_windows(split.train, config.L, config.H)
    pool = build_model_pool(windows, config.seed, config.learning_rate)
    background = make_background(windows, config.background_cap, config.seed)
    Xv, yv = validation_windows(series, split, config.L)
    val_rmse = [rmse(m.predict_batch(Xv), yv) for m in pool]
    fallback = pool.models[int(np.argmin(val_rmse))].model_id
    return PreparedDataset(name, raw, normalizer, series, split, pool, background, val_rmse, fallback)


def run_variant(prep: PreparedDataset, variant: str, config: RunConfig, explain: bool = False) -> tuple[OnlineRun, float]:
    """Build initial RoCs over validation and run one variant; returns the run and its wall-clock seconds."""
    t0 = time.perf_counter()
    rocs = build_rocs(prep.pool, prep.split.val, config.roc_config, prep.background)
    run = run_online(
        prep.pool,
        rocs,
        prep.series,
        prep.split,
        SelectionVariant(variant, config.periodic_updates),
        config.roc_config,
        prep.background,
        fallback=prep.fallback,
        sigma=config.sigma,
        explain=explain,
    )
    return run, time.perf_counter() - t0


def _score(prep: PreparedDataset, forecasts, actuals, original_scale: bool) -> float:
    if original_scale:
        return rmse(prep.normalizer.invert_values(forecasts), prep.normalizer.invert_values(actuals))
    return rmse(forecasts, actuals)


@dataclass
class DatasetResult:
    name: str
    method_rmse: dict[str, float]
    model_rmse: list[float]
    model_runtime: list[float]
    runtime: dict[str, float]
    drifts: dict[str, int]
    rebuilds: dict[str, int]
    fallback: int


def evaluate_dataset(name: str, raw: TimeSeries, config: RunConfig) -> DatasetResult:
    prep = prepare_dataset(name, raw, config)
    method_rmse: dict[str, float] = {}
    runtime: dict[str, float] = {}
    drifts: dict[str, int] = {}
    rebuilds: dict[str, int] = {}
    for variant in config.variants:
        method = VARIANT_METHODS[variant]
        run, seconds = run_variant(prep, variant, config)
        method_rmse[method] = _score(prep, run.forecasts, run.actuals, config.original_scale)
        runtime[method] = seconds
        drifts[method] = sum(r.drift_fired for r in run.records)
        rebuilds[method] = len(run.rebuilds)
    Xt, yt = holdout_windows(prep.series, prep.split, config.L)
    model_rmse, model_runtime = [], []
    for m in prep.pool:
        t0 = time.perf_counter()
        pred = m.predict_batch(Xt)
        model_runtime.append(time.perf_counter() - t0)
        model_rmse.append(_score(prep, pred, yt, config.original_scale))
    return DatasetResult(name, method_rmse, model_rmse, model_runtime, runtime, drifts, rebuilds, prep.fallback)


# --------------------------------------------------------------------------- ranking


def rank_and_compare(rmse_table, methods: Optional[list[str]] = None, reference: Optional[str] = None):
    """Average ranks per method and wins/losses of the reference against every method.

    ``rmse_table`` has one row per dataset and one column per method. Ranks
    ascend with RMSE and ties share the average rank. ``wins_losses[m]`` is
    ``(wins, losses)`` of the reference versus ``m`` under strict inequality.
    """
    rows = [list(r) for r in rmse_table]
    if not rows or any(len(r) != len(rows[0]) for r in rows) or len(rows[0]) == 0:
        raise IncompleteTable("the RMSE table must be a non-empty rectangle")
    table = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(table)):
        raise IncompleteTable("the RMSE table has missing or non-finite entries")
    n_methods = table.shape[1]
    methods = list(methods) if methods is not None else [str(i) for i in range(n_methods)]
    if len(methods) != n_methods:
        raise IncompleteTable("one method name per column is required")
    ref = methods.index(reference) if reference is not None else 0
    ranks = np.vstack([rankdata(row, method="average") for row in table])
    avg_ranks = {m: float(ranks[:, j].mean()) for j, m in enumerate(methods)}
    wins_losses = {
        m: (int(np.sum(table[:, ref] < table[:, j])), int(np.sum(table[:, ref] > table[:, j])))
        for j, m in enumerate(methods)
    }
    return avg_ranks, wins_losses


# --------------------------------------------------------------------------- experiment


@dataclass
class EvaluationReport:
    datasets: list[str]
    methods: list[str]
    rmse: dict[str, dict[str, float]]
    avg_ranks: dict[str, float]
    wins_losses: dict[str, tuple[int, int]]
    runtime: dict[str, dict[str, float]]
    drifts: dict[str, dict[str, int]]
    rebuilds: dict[str, dict[str, int]]
    best_single_model: Optional[int]
    failures: dict[str, str]
    config_hash: str
    seed: int

    def payload(self) -> dict:
        """Everything except wall-clock timings, in a stable key order."""
        return {
            "schema": "tsms-evaluation-report",
            "version": 1,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "methods": self.methods,
            "datasets": self.datasets,
            "best_single_model": self.best_single_model,
            "rmse": self.rmse,
            "avg_ranks": self.avg_ranks,
            "wins_losses": {m: list(v) for m, v in self.wins_losses.items()},
            "drifts": self.drifts,
            "rebuilds": self.rebuilds,
            "failures": self.failures,
        }

    def runtime_summary(self) -> dict[str, dict[str, float]]:
        out = {}
        for m in self.methods:
            vals = [self.runtime[d][m] for d in self.datasets]
            out[m] = {"mean": float(np.mean(vals)), "std": float(np.std(vals)), "max": float(np.max(vals))}
        return out

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report = out / "report.json"
        report.write_text(json.dumps(self.payload(), indent=2) + "\n")
        timing = out / "runtime.json"
        timing.write_text(json.dumps({"per_dataset": self.runtime, "summary": self.runtime_summary()}, indent=2) + "\n")
        return report, timing


def collect_datasets(config: RunConfig) -> tuple[dict[str, TimeSeries], dict[str, str]]:
    found: dict[str, TimeSeries] = {}
    failures: dict[str, str] = {}
    for path in config.datasets:
        name = os.path.basename(path)
        try:
            found[name] = load_dataset_csv(path, config.seed)
        except (TSMSError, OSError) as exc:
            log.error("dataset %s rejected: %s", path, exc)
            failures[name] = f"{type(exc).__name__}: {exc}"
    found.update(datasets.synthetic_corpus(config.synthetic, config.seed))
    return found, failures


def run_experiment(config: RunConfig, series: Optional[dict[str, TimeSeries]] = None) -> EvaluationReport:
    """Evaluate every configured variant plus Best-Single on every dataset.

    ``series`` supplies in-memory datasets instead of the configured files.
    A failing dataset is logged and excluded, never fatal.
    """
    if series is None:
        series, failures = collect_datasets(config)
    else:
        failures = {}
    if not series and not failures:
        raise ConfigError("no datasets configured")
    results: list[DatasetResult] = []
    for name, raw in series.items():
        try:
            results.append(evaluate_dataset(name, raw, config))
        except (TSMSError, ValueError) as exc:
            log.error("dataset %s failed: %s", name, exc)
            failures[name] = f"{type(exc).__name__}: {exc}"

    methods = [VARIANT_METHODS[v] for v in config.variants] + [BEST_SINGLE]
    best_single = None
    if results:
        mean_model = np.mean([r.model_rmse for r in results], axis=0)
        best_idx = int(np.argmin(mean_model))
        best_single = best_idx + 1
        for r in results:
            r.method_rmse[BEST_SINGLE] = r.model_rmse[best_idx]
            r.runtime[BEST_SINGLE] = r.model_runtime[best_idx]
        reference = REFERENCE_METHOD if REFERENCE_METHOD in methods else methods[0]
        avg_ranks, wins_losses = rank_and_compare([[r.method_rmse[m] for m in methods] for r in results], methods, reference)
    else:
        avg_ranks, wins_losses = {}, {}
    return EvaluationReport(
        datasets=[r.name for r in results],
        methods=methods,
        rmse={r.name: {m: r.method_rmse[m] for m in methods} for r in results},
        avg_ranks=avg_ranks,
        wins_losses=wins_losses,
        runtime={r.name: {m: r.runtime[m] for m in methods} for r in results},
        drifts={r.name: r.drifts for r in results},
        rebuilds={r.name: r.rebuilds for r in results},
        best_single_model=best_single,
        failures=failures,
        config_hash=config.fingerprint(),
        seed=config.seed,
    )
