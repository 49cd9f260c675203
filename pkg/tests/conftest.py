import numpy as np
import pytest

from tsms.trees import LEAF, RegressionTree, TreeEnsemble


def stump(feature, threshold, left_value, right_value, max_depth=1):
    return RegressionTree(
        feature=[feature, LEAF, LEAF],
        threshold=[threshold, 0.0, 0.0],
        left=[1, LEAF, LEAF],
        right=[2, LEAF, LEAF],
        value=[0.5 * (left_value + right_value), left_value, right_value],
        max_depth=max_depth,
    )


def ensemble(trees, weights=None, base=0.0, n_features=3, kind=None, model_id=1):
    trees = list(trees)
    if weights is None:
        weights = [1.0 / len(trees)] * len(trees)
    if kind is None:
        kind = "single" if len(trees) == 1 else "forest"
    return TreeEnsemble(kind, tuple(trees), weights, base, model_id, n_features)


def random_tree(rng, n_features, max_depth, feature_pool=None):
    """Random tree with split thresholds drawn from N(0, 1) and leaf values from N(0, 2)."""
    feature, threshold, left, right, value = [], [], [], [], []
    pool = list(range(n_features)) if feature_pool is None else list(feature_pool)

    def grow(depth):
        node = len(feature)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(rng.normal(scale=2.0)))
        if depth < max_depth and (depth == 0 or rng.random() < 0.8):
            feature[node] = int(rng.choice(pool))
            threshold[node] = float(rng.normal())
            left[node] = grow(depth + 1)
            right[node] = grow(depth + 1)
        return node

    grow(0)
    return RegressionTree(feature, threshold, left, right, value, max_depth)


def random_ensemble(rng, n_features, n_trees, max_depth, kind=None):
    trees = [random_tree(rng, n_features, max_depth) for _ in range(n_trees)]
    if kind is None:
        kind = rng.choice(["forest", "gbt"]) if n_trees > 1 else "single"
    if kind == "gbt":
        weights = [0.3] * n_trees
        base = float(rng.normal())
    else:
        weights = [1.0 / n_trees] * n_trees
        base = 0.0
    return TreeEnsemble(str(kind), tuple(trees), weights, base, 1, n_features)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one "PASS/FAIL Cn ..." line per acceptance criterion, echoed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
