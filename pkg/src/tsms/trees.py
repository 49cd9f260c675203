"""CART regression trees and the forest / boosting ensembles built from them.

Trees are stored as flat node arrays. A node with ``feature == -1`` is a
leaf; every other node routes ``x`` to ``left`` iff
``x[feature] <= threshold``. Feature indices are 0-based.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyTrainingSet, UnsupportedHorizon
from .series import LagWindow, window_matrix

LEAF = -1
SERIALIZATION_VERSION = 1


@dataclass(frozen=True, eq=False)
class RegressionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    max_depth: int

    def __post_init__(self):
        for name, dtype in (
            ("feature", np.int64),
            ("threshold", np.float64),
            ("left", np.int64),
            ("right", np.int64),
            ("value", np.float64),
        ):
            arr = np.array(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @cached_property
    def _py(self):
        # plain lists are much faster than numpy scalars for per-sample traversal
        return (
            self.feature.tolist(),
            self.threshold.tolist(),
            self.left.tolist(),
            self.right.tolist(),
            self.value.tolist(),
        )

    def leaf_index(self, x: Sequence[float]) -> int:
        feature, threshold, left, right, _ = self._py
        node = 0
        while feature[node] != LEAF:
            node = left[node] if x[feature[node]] <= threshold[node] else right[node]
        return node

    def decision_path(self, x: Sequence[float]) -> list[int]:
        feature, threshold, left, right, _ = self._py
        node = 0
        path = [0]
        while feature[node] != LEAF:
            node = left[node] if x[feature[node]] <= threshold[node] else right[node]
            path.append(node)
        return path

    def predict_one(self, x: Sequence[float]) -> float:
        return self._py[4][self.leaf_index(x)]

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            active = feat != LEAF
            if not active.any():
                break
            f = np.where(active, feat, 0)
            go_left = X[rows, f] <= self.threshold[node]
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(active, nxt, node)
        return self.value[node]

    def depth(self) -> int:
        best = 0
        stack = [(0, 0)]
        while stack:
            node, d = stack.pop()
            if self.feature[node] == LEAF:
                best = max(best, d)
            else:
                stack.append((int(self.left[node]), d + 1))
                stack.append((int(self.right[node]), d + 1))
        return best

    def to_dict(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(
            feature=d["feature"],
            threshold=d["threshold"],
            left=d["left"],
            right=d["right"],
            value=d["value"],
            max_depth=int(d["max_depth"]),
        )


@dataclass(frozen=True, eq=False)
class TreeEnsemble:
    kind: str
    trees: tuple[RegressionTree, ...]
    tree_weights: np.ndarray
    base_offset: float
    model_id: int
    n_features: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("single", "forest", "gbt"):
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        w = np.array(self.tree_weights, dtype=np.float64)
        if w.size != len(self.trees):
            raise ValueError("one weight per tree is required")
        w.setflags(write=False)
        object.__setattr__(self, "tree_weights", w)
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "base_offset", float(self.base_offset))

    @property
    def name(self) -> str:
        parts = [self.kind] + [f"{k}={self.params[k]}" for k in sorted(self.params)]
        return "(" + ", ".join(parts) + ")"

    @cached_property
    def _py_weights(self) -> list[float]:
        return self.tree_weights.tolist()

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} lags per row, got shape {X.shape}")
        out = np.full(X.shape[0], self.base_offset)
        for w, tree in zip(self.tree_weights, self.trees):
            out += w * tree.predict_batch(X)
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "model_id": self.model_id,
            "n_features": self.n_features,
            "base_offset": self.base_offset,
            "tree_weights": self.tree_weights.tolist(),
            "params": dict(self.params),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeEnsemble":
        return cls(
            kind=d["kind"],
            trees=tuple(RegressionTree.from_dict(t) for t in d["trees"]),
            tree_weights=d["tree_weights"],
            base_offset=d["base_offset"],
            model_id=int(d["model_id"]),
            n_features=int(d["n_features"]),
            params=dict(d.get("params", {})),
        )


@dataclass(frozen=True, eq=False)
class ModelPool:
    models: tuple[TreeEnsemble, ...]
    seed: int

    def __len__(self) -> int:
        return len(self.models)

    def __iter__(self):
        return iter(self.models)

    def __getitem__(self, i: int) -> TreeEnsemble:
        return self.models[i]

    @property
    def model_ids(self) -> list[int]:
        return [m.model_id for m in self.models]

    def by_id(self, model_id: int) -> TreeEnsemble:
        for m in self.models:
            if m.model_id == model_id:
                return m
        raise KeyError(model_id)


@dataclass(frozen=True)
class StabilityIntervals:
    """Per-feature half-open intervals ``(lo, hi]`` that keep every tree path fixed."""

    lo: np.ndarray
    hi: np.ndarray

    def contains(self, j: int, value: float) -> bool:
        return self.lo[j] < value <= self.hi[j]


# --------------------------------------------------------------------------- fitting


def _as_xy(windows) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(windows, tuple) and len(windows) == 2:
        X, y = windows
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if y.ndim == 2:
            if y.shape[1] != 1:
                raise UnsupportedHorizon("tree learners only fit H = 1 targets")
            y = y[:, 0]
    else:
        windows = list(windows)
        if not windows:
            raise EmptyTrainingSet("no training windows")
        X, Y = window_matrix(windows)
        if Y.shape[1] != 1:
            raise UnsupportedHorizon("tree learners only fit H = 1 targets")
        y = Y[:, 0]
    if X.shape[0] == 0:
        raise EmptyTrainingSet("no training windows")
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DimensionMismatch("lag matrix and targets disagree in shape")
    return X, y


def _best_split(Xn: np.ndarray, yn: np.ndarray):
    """Best (feature, threshold, gain) by squared-error reduction, or None.

    Candidates are midpoints between consecutive distinct sorted values.
    Ties resolve to the lowest feature index, then the lowest threshold.
    """
    n, n_feat = Xn.shape
    c = yn - yn.mean()
    sse = float(c @ c)
    if not sse > 0.0:
        return None
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    cs = np.cumsum(c[order], axis=0)
    total = cs[-1]
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    s_left = cs[:-1]
    s_right = total - s_left
    gain = s_left**2 / n_left + s_right**2 / (n - n_left) - total**2 / n
    gain = np.where(xs[:-1] < xs[1:], gain, -np.inf)
    flat = gain.T.ravel()
    best = int(np.argmax(flat))
    best_gain = float(flat[best])
    if not best_gain > 1e-12 * sse:
        return None
    f, pos = divmod(best, n - 1)
    a, b = xs[pos, f], xs[pos + 1, f]
    thr = 0.5 * (a + b)
    if not a <= thr < b:
        thr = a
    return f, float(thr), best_gain


def _grow_tree(X: np.ndarray, y: np.ndarray, max_depth: int) -> RegressionTree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def grow(idx: np.ndarray, depth: int) -> int:
        node = len(feature)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        yn = y[idx]
        value.append(float(yn.mean()))
        if depth >= max_depth or idx.size < 2:
            return node
        Xn = X[idx]
        split = _best_split(Xn, yn)
        if split is None:
            return node
        f, thr, _ = split
        go_left = Xn[:, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = grow(idx[go_left], depth + 1)
        right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(X.shape[0]), 0)
    return RegressionTree(feature, threshold, left, right, value, max_depth)


def fit_decision_tree(windows, max_depth: int, seed: int = 0) -> RegressionTree:
    """Greedy CART regression tree.

    ``windows`` is a list of :class:`LagWindow` or an ``(X, y)`` tuple. The
    learner is deterministic, so ``seed`` only exists for interface symmetry
    with the ensemble learners.
    """
    X, y = _as_xy(windows)
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    return _grow_tree(X, y, max_depth)


def fit_single_tree(windows, max_depth: int, seed: int = 0, model_id: int = 1) -> TreeEnsemble:
    X, y = _as_xy(windows)
    tree = _grow_tree(X, y, max_depth)
    return TreeEnsemble("single", (tree,), [1.0], 0.0, model_id, X.shape[1], {"max_depth": max_depth})


def fit_random_forest(windows, n_trees: int, max_depth: int, seed: int, model_id: int = 1) -> TreeEnsemble:
    """Bagged CART trees; every split considers all features."""
    X, y = _as_xy(windows)
    if n_trees < 1:
        raise ValueError("a forest needs at least one tree")
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    trees = []
    for _ in range(n_trees):
        idx = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X[idx], y[idx], max_depth))
    return TreeEnsemble(
        "forest",
        tuple(trees),
        np.full(n_trees, 1.0 / n_trees),
        0.0,
        model_id,
        X.shape[1],
        {"max_depth": max_depth, "n_trees": n_trees},
    )


def fit_gradient_boosting(
    windows,
    n_trees: int,
    max_depth: int,
    learning_rate: float = 0.1,
    seed: int = 0,
    model_id: int = 1,
) -> TreeEnsemble:
    """Least-squares boosting: each stage fits a CART tree to the residuals."""
    X, y = _as_xy(windows)
    if not 0.0 < learning_rate <= 1.0:
        raise ValueError("learning_rate must lie in (0, 1]")
    if n_trees < 0:
        raise ValueError("n_trees must be >= 0")
    base = float(y.mean())
    residual = y - base
    trees = []
    for _ in range(n_trees):
        tree = _grow_tree(X, residual, max_depth)
        residual = residual - learning_rate * tree.predict_batch(X)
        trees.append(tree)
    return TreeEnsemble(
        "gbt",
        tuple(trees),
        np.full(n_trees, learning_rate),
        base,
        model_id,
        X.shape[1],
        {"max_depth": max_depth, "n_trees": n_trees, "learning_rate": learning_rate},
    )


# --------------------------------------------------------------------------- inference


def predict(model: TreeEnsemble, lags: Sequence[float]) -> float:
    if len(lags) != model.n_features:
        raise DimensionMismatch(f"expected {model.n_features} lags, got {len(lags)}")
    x = lags.tolist() if isinstance(lags, np.ndarray) else list(lags)
    out = model.base_offset
    for w, tree in zip(model._py_weights, model.trees):
        out += w * tree.predict_one(x)
    return out


def stability_intervals(model: TreeEnsemble, lags: Sequence[float]) -> StabilityIntervals:
    """Intervals per feature inside which the prediction provably does not move.

    Every realized root-to-leaf path contributes its split constraints; the
    result is sufficient for path stability but not necessarily maximal.
    """
    if len(lags) != model.n_features:
        raise DimensionMismatch(f"expected {model.n_features} lags, got {len(lags)}")
    x = np.asarray(lags, dtype=np.float64).tolist()
    lo = np.full(model.n_features, -np.inf)
    hi = np.full(model.n_features, np.inf)
    for tree in model.trees:
        feature, threshold = tree._py[0], tree._py[1]
        for node in tree.decision_path(x)[:-1]:
            f, thr = feature[node], threshold[node]
            if x[f] <= thr:
                hi[f] = min(hi[f], thr)
            else:
                lo[f] = max(lo[f], thr)
    return StabilityIntervals(lo, hi)


# --------------------------------------------------------------------------- pool

SINGLE_DEPTHS = (4, 8, 16)
ENSEMBLE_DEPTHS = (2, 4, 6)
ENSEMBLE_SIZES = (16, 32, 64)


def pool_configurations() -> list[tuple[str, dict]]:
    """The 21 pool members in row-major order: trees, then forests, then boosting."""
    configs: list[tuple[str, dict]] = [("single", {"max_depth": d}) for d in SINGLE_DEPTHS]
    for kind in ("forest", "gbt"):
        for d in ENSEMBLE_DEPTHS:
            for n in ENSEMBLE_SIZES:
                configs.append((kind, {"max_depth": d, "n_trees": n}))
    return configs


def model_seed(seed: int, model_id: int) -> int:
    return int(np.random.SeedSequence([seed, model_id]).generate_state(1)[0])


def build_model_pool(train_windows, seed: int, learning_rate: float = 0.1) -> ModelPool:
    X, y = _as_xy(train_windows)
    models = []
    for model_id, (kind, cfg) in enumerate(pool_configurations(), start=1):
        s = model_seed(seed, model_id)
        if kind == "single":
            m = fit_single_tree((X, y), cfg["max_depth"], s, model_id)
        elif kind == "forest":
            m = fit_random_forest((X, y), cfg["n_trees"], cfg["max_depth"], s, model_id)
        else:
            m = fit_gradient_boosting((X, y), cfg["n_trees"], cfg["max_depth"], learning_rate, s, model_id)
        models.append(m)
    return ModelPool(tuple(models), seed)


# --------------------------------------------------------------------------- serialization


def dumps_model(model: TreeEnsemble) -> str:
    return json.dumps({"format": "tsms-tree-ensemble", "version": SERIALIZATION_VERSION, "model": model.to_dict()})


def loads_model(text: str) -> TreeEnsemble:
    payload = json.loads(text)
    if payload.get("format") != "tsms-tree-ensemble":
        raise ValueError("not a serialized tree ensemble")
    if payload.get("version") != SERIALIZATION_VERSION:
        raise ValueError(f"unsupported model format version {payload.get('version')}")
    return TreeEnsemble.from_dict(payload["model"])


def save_pool(pool: ModelPool, path) -> None:
    payload = {
        "format": "tsms-model-pool",
        "version": SERIALIZATION_VERSION,
        "seed": pool.seed,
        "models": [m.to_dict() for m in pool.models],
    }
    Path(path).write_text(json.dumps(payload))


def load_pool(path) -> ModelPool:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != "tsms-model-pool" or payload.get("version") != SERIALIZATION_VERSION:
        raise ValueError("unsupported model pool file")
    return ModelPool(tuple(TreeEnsemble.from_dict(m) for m in payload["models"]), int(payload["seed"]))


def rmse(pred, actual) -> float:
    diff = np.asarray(pred, dtype=np.float64) - np.asarray(actual, dtype=np.float64)
    return math.sqrt(float(np.mean(diff * diff)))
