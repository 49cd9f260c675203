"""Exact interventional Shapley values for tree ensembles.

Two value functions are supported, both averaged over a background set of
lag windows. For a coalition ``S`` the hybrid input takes features in ``S``
from the explained instance ``x`` and the rest from a background row ``z``:

* ``"prediction"``: mean over ``z`` of ``g(hybrid)``
* ``"loss"``: mean over ``z`` of ``(g(hybrid) - y) ** 2``

:func:`shapley_values` enumerates all coalitions, but only over features
whose substitution can actually change a tree path for some background row.
For a fixed ``(tree, z)`` pair the reachable leaves partition the coalition
space by the on/off pattern of the features on their paths, so each pair
costs one pass over the coalition table instead of a traversal per
coalition. :func:`shapley_oracle` is the literal textbook formula and shares
no code with the fast path beyond :func:`tsms.trees.predict`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numba
import numpy as np

from .errors import DimensionMismatch, EmptyBackground, MissingTarget, TooManyFeatures
from .trees import LEAF, TreeEnsemble, predict

KINDS = ("prediction", "loss")
MAX_FEATURES = 25
ORACLE_MAX_FEATURES = 12


@dataclass(frozen=True)
class BackgroundSet:
    rows: np.ndarray
    cap: Optional[int] = None
    seed: Optional[int] = None

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise EmptyBackground("background needs at least one row")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    def __len__(self) -> int:
        return self.rows.shape[0]


def make_background(windows, cap: Optional[int] = 25, seed: int = 0) -> BackgroundSet:
    """Background from training lag windows, subsampled without replacement to ``cap`` rows."""
    X = np.array([w.lags for w in windows], dtype=np.float64) if not isinstance(windows, np.ndarray) else windows
    if X.shape[0] == 0:
        raise EmptyBackground("no windows to draw a background from")
    if cap is None or cap >= X.shape[0]:
        return BackgroundSet(X, cap, seed)
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(X.shape[0], size=cap, replace=False))
    return BackgroundSet(X[idx], cap, seed)


@dataclass(frozen=True)
class Explanation:
    phi: np.ndarray
    kind: str
    base_value: float
    target: Optional[float] = None
    full_value: Optional[float] = None

    def __post_init__(self):
        phi = np.array(self.phi, dtype=np.float64)
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)


def _check(model: TreeEnsemble, background, x, y, kind, limit: int):
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    if kind == "loss" and y is None:
        raise MissingTarget("the loss value function needs a target y")
    rows = background.rows if isinstance(background, BackgroundSet) else np.asarray(background, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise EmptyBackground("background needs at least one row")
    x = np.asarray(x, dtype=np.float64)
    L = x.size
    if L != model.n_features or rows.shape[1] != L:
        raise DimensionMismatch(f"model expects {model.n_features} features, got x of {L} and background of {rows.shape[1]}")
    if L > limit:
        raise TooManyFeatures(f"{L} features exceed the enumeration limit of {limit}")
    target = None if y is None else float(np.asarray(y, dtype=np.float64).reshape(-1)[0])
    return rows, x, target


# --------------------------------------------------------------------------- value function


def eval_value_function(model: TreeEnsemble, background, x, y, S, kind: str) -> float:
    """Interventional expectation of the prediction or squared loss for coalition ``S``."""
    rows, x, target = _check(model, background, x, y, kind, 10**9)
    members = sorted(set(int(j) for j in S))
    if any(j < 0 or j >= x.size for j in members):
        raise ValueError("coalition members must be feature indices in [0, L)")
    total = 0.0
    for z in rows:
        h = z.copy()
        h[members] = x[members]
        p = predict(model, h)
        total += p if kind == "prediction" else (p - target) ** 2
    return total / rows.shape[0]


# --------------------------------------------------------------------------- fast path


def _flatten(model: TreeEnsemble):
    sizes = [t.n_nodes for t in model.trees]
    roots = np.zeros(len(sizes), dtype=np.int64)
    if sizes:
        roots[1:] = np.cumsum(sizes)[:-1]
    if not model.trees:
        empty_i = np.zeros(0, dtype=np.int64)
        empty_f = np.zeros(0, dtype=np.float64)
        return empty_i, empty_f, empty_i, empty_i, empty_f, roots, max(sizes, default=1)
    feature = np.concatenate([t.feature for t in model.trees])
    threshold = np.concatenate([t.threshold for t in model.trees])
    left = np.concatenate([np.where(t.left >= 0, t.left + r, -1) for t, r in zip(model.trees, roots)])
    right = np.concatenate([np.where(t.right >= 0, t.right + r, -1) for t, r in zip(model.trees, roots)])
    value = np.concatenate([t.value for t in model.trees])
    return feature, threshold, left, right, value, roots, max(sizes)


@numba.njit(cache=True)
def _relevant_features(feature, threshold, left, right, roots, max_nodes, x, Z):
    """Bitmask of features whose source (x vs z) changes some reachable split."""
    relevant = 0
    stack_node = np.empty(max_nodes + 1, dtype=np.int64)
    stack_on = np.empty(max_nodes + 1, dtype=np.int64)
    stack_off = np.empty(max_nodes + 1, dtype=np.int64)
    for b in range(Z.shape[0]):
        for t in range(roots.size):
            top = 0
            stack_node[0] = roots[t]
            stack_on[0] = 0
            stack_off[0] = 0
            top = 1
            while top > 0:
                top -= 1
                node = stack_node[top]
                on = stack_on[top]
                off = stack_off[top]
                f = feature[node]
                if f < 0:
                    continue
                xl = x[f] <= threshold[node]
                zl = Z[b, f] <= threshold[node]
                if xl == zl:
                    stack_node[top] = left[node] if xl else right[node]
                    stack_on[top] = on
                    stack_off[top] = off
                    top += 1
                    continue
                bit = np.int64(1) << f
                relevant |= bit
                xc = left[node] if xl else right[node]
                zc = right[node] if xl else left[node]
                if on & bit:
                    stack_node[top] = xc
                    stack_on[top] = on
                    stack_off[top] = off
                    top += 1
                elif off & bit:
                    stack_node[top] = zc
                    stack_on[top] = on
                    stack_off[top] = off
                    top += 1
                else:
                    stack_node[top] = xc
                    stack_on[top] = on | bit
                    stack_off[top] = off
                    stack_node[top + 1] = zc
                    stack_on[top + 1] = on
                    stack_off[top + 1] = off | bit
                    top += 2
    return relevant


@numba.njit(cache=True)
def _hybrid_predictions(feature, threshold, left, right, value, roots, weights, base, max_nodes, x, Z, pos, k):
    """Ensemble output on every hybrid: table[b, m] for background row b and coalition mask m.

    Mask bits index the compressed relevant features via ``pos``. Tree
    contributions are accumulated in tree order for every mask, matching
    :func:`tsms.trees.predict` term by term.
    """
    size = np.int64(1) << k
    full = size - 1
    out = np.empty((Z.shape[0], size))
    stack_node = np.empty(max_nodes + 1, dtype=np.int64)
    stack_on = np.empty(max_nodes + 1, dtype=np.int64)
    stack_off = np.empty(max_nodes + 1, dtype=np.int64)
    for b in range(Z.shape[0]):
        row = out[b]
        row[:] = base
        for t in range(roots.size):
            w = weights[t]
            stack_node[0] = roots[t]
            stack_on[0] = 0
            stack_off[0] = 0
            top = 1
            while top > 0:
                top -= 1
                node = stack_node[top]
                on = stack_on[top]
                off = stack_off[top]
                f = feature[node]
                if f < 0:
                    contrib = w * value[node]
                    free = full & ~(on | off)
                    s = free
                    while True:
                        row[on | s] += contrib
                        if s == 0:
                            break
                        s = (s - 1) & free
                    continue
                xl = x[f] <= threshold[node]
                zl = Z[b, f] <= threshold[node]
                if xl == zl:
                    stack_node[top] = left[node] if xl else right[node]
                    stack_on[top] = on
                    stack_off[top] = off
                    top += 1
                    continue
                bit = np.int64(1) << pos[f]
                xc = left[node] if xl else right[node]
                zc = right[node] if xl else left[node]
                if on & bit:
                    stack_node[top] = xc
                    stack_on[top] = on
                    stack_off[top] = off
                    top += 1
                elif off & bit:
                    stack_node[top] = zc
                    stack_on[top] = on
                    stack_off[top] = off
                    top += 1
                else:
                    stack_node[top] = xc
                    stack_on[top] = on | bit
                    stack_off[top] = off
                    stack_node[top + 1] = zc
                    stack_on[top + 1] = on
                    stack_off[top + 1] = off | bit
                    top += 2
    return out


@numba.njit(cache=True)
def _shapley_from_table(v, k, weights):
    """phi_i = sum over masks without i of weights[|S|] * (v[S + i] - v[S])."""
    phi = np.zeros(k)
    size = v.size
    for i in range(k):
        bit = np.int64(1) << i
        acc = 0.0
        for m in range(size):
            if m & bit:
                continue
            # popcount
            c = 0
            mm = m
            while mm:
                mm &= mm - 1
                c += 1
            acc += weights[c] * (v[m | bit] - v[m])
        phi[i] = acc
    return phi


def shapley_weights(n: int) -> np.ndarray:
    """Coalition weights |S|! (n - |S| - 1)! / n! for |S| = 0 .. n - 1, from exact integers."""
    if n == 0:
        return np.zeros(0)
    return np.array([1.0 / (n * math.comb(n - 1, s)) for s in range(n)])


def coalition_table(model: TreeEnsemble, background, x, y=None, kind: str = "prediction"):
    """Value function over all coalitions of the relevant features.

    Returns ``(v, relevant)``: ``relevant`` lists the original feature
    indices in compressed-bit order and ``v[m]`` is the value of the
    coalition whose compressed bitmask is ``m``. Features outside
    ``relevant`` never change any hybrid prediction.
    """
    rows, x, target = _check(model, background, x, y, kind, MAX_FEATURES)
    feature, threshold, left, right, value, roots, max_nodes = _flatten(model)
    mask = _relevant_features(feature, threshold, left, right, roots, max_nodes, x, rows)
    relevant = [j for j in range(x.size) if (mask >> j) & 1]
    pos = np.full(x.size, -1, dtype=np.int64)
    pos[relevant] = np.arange(len(relevant))
    table = _hybrid_predictions(
        feature, threshold, left, right, value, roots, model.tree_weights, model.base_offset,
        max_nodes, x, rows, pos, len(relevant),
    )
    if kind == "loss":
        table = (table - target) ** 2
    v = table.sum(axis=0) / rows.shape[0]
    return v, relevant


def shapley_values(model: TreeEnsemble, background, x, y=None, kind: str = "prediction") -> Explanation:
    """Exact Shapley values of every lag under the chosen value function."""
    v, relevant = coalition_table(model, background, x, y, kind)
    L = model.n_features
    phi = np.zeros(L)
    if relevant:
        # null players can be dropped from the game without changing the others' values
        phi[relevant] = _shapley_from_table(v, len(relevant), shapley_weights(len(relevant)))
    target = None if y is None else float(np.asarray(y, dtype=np.float64).reshape(-1)[0])
    return Explanation(phi, kind, float(v[0]), target if kind == "loss" else None, float(v[-1]))


def shapley_values_by_tree(model: TreeEnsemble, background, x) -> Explanation:
    """Prediction-kind values assembled tree by tree through linearity.

    Each tree is explained as its own game; the ensemble attribution is the
    weighted sum, and the base offset only moves the base value.
    """
    rows, x, _ = _check(model, background, x, None, "prediction", MAX_FEATURES)
    phi = np.zeros(model.n_features)
    base_value = model.base_offset
    full_value = model.base_offset
    for w, tree in zip(model.tree_weights, model.trees):
        single = TreeEnsemble("single", (tree,), [1.0], 0.0, model.model_id, model.n_features)
        e = shapley_values(single, rows, x, kind="prediction")
        phi += w * e.phi
        base_value += w * e.base_value
        full_value += w * e.full_value
    return Explanation(phi, "prediction", base_value, None, full_value)


# --------------------------------------------------------------------------- oracle


def shapley_oracle(model: TreeEnsemble, background, x, y=None, kind: str = "prediction") -> Explanation:
    """Definition-level Shapley values: every marginal contribution, no caching."""
    rows, x, target = _check(model, background, x, y, kind, ORACLE_MAX_FEATURES)
    n = x.size
    players = list(range(n))
    phi = np.zeros(n)
    for i in players:
        others = [j for j in players if j != i]
        for size in range(n):
            weight = 1.0 / (math.comb(n - 1, size) * n)
            for S in combinations(others, size):
                with_i = eval_value_function(model, rows, x, target, S + (i,), kind)
                without = eval_value_function(model, rows, x, target, S, kind)
                phi[i] += weight * (with_i - without)
    base = eval_value_function(model, rows, x, target, (), kind)
    full = eval_value_function(model, rows, x, target, players, kind)
    return Explanation(phi, kind, base, target if kind == "loss" else None, full)
