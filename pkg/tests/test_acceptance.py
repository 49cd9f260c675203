"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line that is echoed in the terminal
summary. Criterion 9 is a soft directional check and reports as xfail
instead of failing the run.
"""

import json
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE, random_ensemble
from test_dtw import dtw_reference
from tsms import harness
from tsms.cli import main
from tsms.datasets import stitched_sine, synthetic_corpus
from tsms.drift import hoeffding_bound, init_detector
from tsms.dtw import dtw_distance
from tsms.harness import RunConfig, prepare_dataset, prepare_series, run_experiment, run_variant
from tsms.roc import build_rocs, extract_salient_subsequences
from tsms.series import TimeSeries
from tsms.shapley import eval_value_function, shapley_oracle, shapley_values, shapley_values_by_tree
from tsms.trees import predict, stability_intervals

# seed of the desk-scale benchmark (criteria 9 and 10)
BENCH_SEED = 7


def record(n, title, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'}  C{n:<2}  {title}" + (f"  [{detail}]" if detail else "")
    ACCEPTANCE[n] = line
    print(line)
    return ok


def check(n, title, ok, detail=""):
    assert record(n, title, ok, detail), detail


def test_c01_shapley_oracle_equivalence():
    rng = np.random.default_rng(101)
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(200):
        L = int(rng.integers(3, 9))
        m = random_ensemble(rng, L, int(rng.integers(1, 9)), int(rng.integers(1, 4)))
        bg = rng.normal(size=(int(rng.integers(1, 6)), L))
        x, y = rng.normal(size=L), float(rng.normal())
        for kind in ("prediction", "loss"):
            fast = shapley_values(m, bg, x, y, kind).phi
            slow = shapley_oracle(m, bg, x, y, kind).phi
            worst = max(worst, float(np.max(np.abs(fast - slow))))
    elapsed = time.perf_counter() - t0
    check(1, "Shapley fast path equals oracle", worst <= 1e-9 and elapsed <= 60, f"max err {worst:.2e}, {elapsed:.1f} s")


def test_c02_efficiency_at_fifteen_lags():
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(100):
        m = random_ensemble(rng, 15, int(rng.integers(1, 9)), int(rng.integers(1, 5)))
        bg = rng.normal(size=(int(rng.integers(1, 11)), 15))
        x, y = rng.normal(size=15), float(rng.normal())
        for kind in ("prediction", "loss"):
            phi = shapley_values(m, bg, x, y, kind).phi
            gap = eval_value_function(m, bg, x, y, range(15), kind) - eval_value_function(m, bg, x, y, (), kind)
            worst = max(worst, abs(float(phi.sum()) - gap))
    check(2, "efficiency at L = 15, both kinds", worst <= 1e-9, f"max err {worst:.2e}")


def test_c03_linearity_over_trees():
    rng = np.random.default_rng(303)
    worst = 0.0
    for i in range(50):
        L = int(rng.integers(4, 13))
        m = random_ensemble(rng, L, int(rng.integers(2, 9)), int(rng.integers(1, 5)), kind=("forest", "gbt")[i % 2])
        bg = rng.normal(size=(int(rng.integers(1, 8)), L))
        x = rng.normal(size=L)
        worst = max(worst, float(np.max(np.abs(shapley_values(m, bg, x).phi - shapley_values_by_tree(m, bg, x).phi))))
    check(3, "per-tree combination equals whole ensemble", worst <= 1e-9, f"max err {worst:.2e}")


def test_c04_thresholding_example():
    neg = np.array([0, 0.5, 0.3, 0, 0.1, 0.2, 1.3])
    window = np.arange(7.0) * 10
    out = extract_salient_subsequences(window, -neg, 0.01)
    ok = len(out) == 1 and np.array_equal(out[0], window[4:7])
    check(4, "thresholding example keeps the last three lags", ok, f"{[o.tolist() for o in out]}")


def test_c05_dtw_oracle():
    rng = np.random.default_rng(505)
    mismatches = 0
    for _ in range(500):
        a = rng.normal(size=int(rng.integers(1, 9)))
        b = rng.normal(size=int(rng.integers(1, 9)))
        mismatches += dtw_distance(a, b) != dtw_reference(a, b)
    fixed = (
        dtw_distance([1, 2, 3], [1, 2, 3]) == 0.0
        and dtw_distance([0, 1], [0, 0, 1]) == 0.0
        and dtw_distance([0, 2], [1]) == 2.0
    )
    check(5, "DTW equals memoized recursion", mismatches == 0 and fixed, f"{mismatches} mismatches, fixed ok={fixed}")


def test_c06_hoeffding():
    b = hoeffding_bound(1.0, 0.99, 100)
    d = init_detector(TimeSeries([0.0, 1.0, 0.0, 1.0]))
    quiet = not any(d.observe(0.5) for _ in range(10_000))
    step = init_detector(TimeSeries([-0.5, 0.5]))
    fires = step.observe(1.0) and step.last_event is not None
    ok = abs(b - 0.059296) <= 1e-5 and quiet and fires
    check(6, "Hoeffding bound, quiet stream, unit step", ok, f"bound {b:.6f}, quiet={quiet}, W=1 fires={fires}")


@pytest.fixture(scope="module")
def stitched_prep():
    config = RunConfig(seed=3)
    return prepare_dataset("stitched", stitched_sine(500, shift=3.0, change_at=0.85, seed=3), config), config


def test_c07_roc_counts(stitched_prep):
    prep, config = stitched_prep
    trace = []
    rocs = build_rocs(prep.pool, prep.split.val, config.roc_config, prep.background, trace=trace)
    winners = {t.chunk_index: t.best_model for t in trace}
    ok = len(prep.split.val) == 125 and len(trace) == 4 and all(t.n_windows == 10 for t in trace)
    members = [(r.model_id, m) for r in rocs for m in r.members]
    ok = ok and all(len(m) >= 3 and winners[m.chunk_index] == mid for mid, m in members)
    check(7, "4 chunks x 10 windows, members >= 3 with valid provenance", ok, f"{len(trace)} chunks, {len(members)} members")


def test_c08_variant_behaviour(stitched_prep):
    prep, config = stitched_prep
    static, _ = run_variant(prep, "static", config)
    periodic, _ = run_variant(prep, "periodic", config)
    adaptive, _ = run_variant(prep, "adaptive", config)
    drifts = sum(r.drift_fired for r in adaptive.records)
    hist = adaptive.size_history
    monotone = all(all(y >= x for x, y in zip(a, b)) for a, b in zip(hist, hist[1:]))
    ok = len(static.rebuilds) == 0 and len(periodic.rebuilds) == 10 and len(periodic.records) == 125
    ok = ok and drifts >= 1 and monotone
    check(
        8,
        "static 0 / periodic 10 rebuilds, adaptive drifts and RoCs never shrink",
        ok,
        f"static {len(static.rebuilds)}, periodic {len(periodic.rebuilds)}, drifts {drifts}",
    )


def real_series(seed):
    """Three statsmodels series with a level shift injected at 85 % of the retained slice."""
    sm = pytest.importorskip("statsmodels.api")
    raw = {
        "sunspots": sm.datasets.sunspots.load_pandas().data["SUNACTIVITY"].to_numpy(),
        "elnino": sm.datasets.elnino.load_pandas().data.iloc[:, 1:].to_numpy().ravel(),
        "co2": sm.datasets.co2.load_pandas().data["co2"].dropna().to_numpy(),
    }
    out = {}
    for name, values in raw.items():
        s = prepare_series(values, seed).values.copy()
        cut = int(0.85 * len(s))
        s[cut:] += 1.5 * s[:cut].std()
        out[f"{name}-shifted"] = TimeSeries(s)
    return out


@pytest.fixture(scope="module")
def bench():
    series = dict(synthetic_corpus(20, seed=BENCH_SEED))
    series.update(real_series(BENCH_SEED))
    config = RunConfig(seed=BENCH_SEED)
    wall = {}
    inner = harness.evaluate_dataset

    def timed(name, raw, cfg):
        t0 = time.perf_counter()
        try:
            return inner(name, raw, cfg)
        finally:
            wall[name] = time.perf_counter() - t0

    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(harness, "evaluate_dataset", timed)
        report = run_experiment(config, series)
    return report, wall


@pytest.mark.slow
def test_c09_directional_rank(bench):
    report, _ = bench
    r = report.avg_ranks
    detail = ", ".join(f"{m} {r[m]:.2f}" for m in report.methods) + f"; {len(report.datasets)} datasets, seed {BENCH_SEED}"
    enough = len(report.datasets) >= 20 and not report.failures
    ok = enough and r["TSMS"] <= r["TSMS-St"]
    if not record(9, "average rank TSMS <= TSMS-St (soft)", ok, detail):
        if not enough:
            pytest.fail(detail)
        pytest.xfail("soft directional check missed; see the decisions ledger. " + detail)


@pytest.mark.slow
def test_c10_runtime_ordering(bench):
    report, wall = bench
    s = report.runtime_summary()
    st, ad, per = s["TSMS-St"]["mean"], s["TSMS"]["mean"], s["TSMS-Per"]["mean"]
    slowest = max(wall.values())
    ok = st < ad < per and slowest < 120 and len(report.datasets) >= 20
    check(10, "mean runtime TSMS-St < TSMS < TSMS-Per, each dataset < 120 s", ok, f"{st:.2f} / {ad:.2f} / {per:.2f} s, slowest dataset {slowest:.1f} s")


@pytest.mark.slow
def test_c11_byte_identical_reports(tmp_path):
    for i, (name, s) in enumerate(synthetic_corpus(2, seed=11).items()):
        (tmp_path / f"{name}.csv").write_text("\n".join(repr(float(v)) for v in s.values) + "\n")
    cfg = tmp_path / "run.cfg"
    cfg.write_text("datasets = *.csv\nseed = 11\nsynthetic = 1\n")
    codes = [main(["run", "--config", str(cfg), "--output-dir", str(tmp_path / d)]) for d in ("a", "b")]
    a, b = (tmp_path / "a" / "report.json").read_bytes(), (tmp_path / "b" / "report.json").read_bytes()
    n = len(json.loads(a)["datasets"])
    check(11, "two runs give byte-identical report.json", codes == [0, 0] and a == b and n == 3, f"exit {codes}, {len(a)} bytes, {n} datasets")


def test_c12_stability_intervals(stitched_prep):
    prep, _ = stitched_prep
    rng = np.random.default_rng(1212)
    v = prep.series.values
    models = list(prep.pool) + [random_ensemble(rng, 15, 6, 4) for _ in range(5)]
    moved = 0
    for _ in range(1000):
        m = models[int(rng.integers(len(models)))]
        t = int(rng.integers(15, len(v)))
        x = v[t - 15 : t].copy()
        j = int(rng.integers(15))
        iv = stability_intervals(m, x)
        lo, hi = max(iv.lo[j], x[j] - 3.0), min(iv.hi[j], x[j] + 3.0)
        xp = x.copy()
        # hit the closed upper end now and then
        xp[j] = hi if (rng.random() < 0.1 and np.isfinite(iv.hi[j])) else rng.uniform(lo, hi)
        if not iv.contains(j, xp[j]):
            xp[j] = x[j]
        moved += predict(m, xp) != predict(m, x)
    check(12, "perturbations inside stability intervals keep predictions bit-identical", moved == 0, f"{moved}/1000 changed")
