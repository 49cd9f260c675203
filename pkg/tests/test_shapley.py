import numpy as np
import pytest
from conftest import ensemble, random_ensemble, random_tree, stump

from tsms.errors import EmptyBackground, MissingTarget, TooManyFeatures
from tsms.shapley import (
    BackgroundSet,
    coalition_table,
    eval_value_function,
    make_background,
    shapley_oracle,
    shapley_values,
    shapley_values_by_tree,
    shapley_weights,
)
from tsms.trees import TreeEnsemble, fit_gradient_boosting, predict


def test_value_function_full_and_empty(rng):
    m = random_ensemble(rng, 4, 3, 3)
    bg = rng.normal(size=(5, 4))
    x = rng.normal(size=4)
    assert eval_value_function(m, bg, x, None, range(4), "prediction") == pytest.approx(predict(m, x), abs=1e-12)
    assert eval_value_function(m, bg, x, None, (), "prediction") == pytest.approx(np.mean([predict(m, z) for z in bg]), abs=1e-12)


def test_loss_value_of_empty_coalition():
    # leaf 1 for x0 <= 0, leaf 3 otherwise; background rows hit each leaf once
    m = ensemble([stump(0, 0.0, 1.0, 3.0)], n_features=2)
    bg = np.array([[-1.0, 0.0], [1.0, 0.0]])
    assert eval_value_function(m, bg, [5.0, 5.0], 0.0, (), "loss") == 5.0


def test_value_function_errors(rng):
    m = random_ensemble(rng, 3, 2, 2)
    with pytest.raises(MissingTarget):
        eval_value_function(m, np.zeros((1, 3)), np.zeros(3), None, (), "loss")
    with pytest.raises(EmptyBackground):
        eval_value_function(m, np.zeros((0, 3)), np.zeros(3), None, (), "prediction")
    with pytest.raises(EmptyBackground):
        BackgroundSet(np.zeros((0, 3)))


def test_weights_sum_to_one_per_player():
    from math import comb

    for n in range(1, 16):
        w = shapley_weights(n)
        assert sum(comb(n - 1, s) * w[s] for s in range(n)) == pytest.approx(1.0, abs=1e-14)


def test_single_feature_model_attributes_to_that_feature(rng):
    trees = [random_tree(rng, 5, 3, feature_pool=[2]) for _ in range(3)]
    m = ensemble(trees, n_features=5)
    bg = rng.normal(size=(6, 5))
    x = rng.normal(size=5)
    e = shapley_values(m, bg, x)
    assert np.all(np.delete(e.phi, 2) == 0.0)
    assert e.phi[2] == pytest.approx(predict(m, x) - e.base_value, abs=1e-12)


@pytest.mark.parametrize("kind", ["prediction", "loss"])
@pytest.mark.parametrize("seed", range(6))
def test_efficiency(kind, seed):
    rng = np.random.default_rng(seed)
    L = int(rng.integers(2, 12))
    m = random_ensemble(rng, L, int(rng.integers(1, 6)), 3)
    bg = rng.normal(size=(4, L))
    x = rng.normal(size=L)
    e = shapley_values(m, bg, x, 0.4, kind)
    full = eval_value_function(m, bg, x, 0.4, range(L), kind)
    empty = eval_value_function(m, bg, x, 0.4, (), kind)
    assert abs(e.phi.sum() - (full - empty)) <= 1e-9
    assert e.base_value == pytest.approx(empty, abs=1e-12)


def test_depth_two_tree_matches_oracle():
    # f0 <= 0 ? (f1 <= 1 ? 2 : -1) : 4
    from tsms.trees import LEAF, RegressionTree

    tree = RegressionTree(
        feature=[0, 1, LEAF, LEAF, LEAF],
        threshold=[0.0, 1.0, 0.0, 0.0, 0.0],
        left=[1, 2, LEAF, LEAF, LEAF],
        right=[4, 3, LEAF, LEAF, LEAF],
        value=[0.0, 0.0, 2.0, -1.0, 4.0],
        max_depth=2,
    )
    m = ensemble([tree], n_features=2)
    bg = np.array([[1.0, 0.0], [-1.0, 2.0]])
    x = np.array([-0.5, 0.5])
    for kind in ("prediction", "loss"):
        a = shapley_values(m, bg, x, 1.0, kind)
        b = shapley_oracle(m, bg, x, 1.0, kind)
        np.testing.assert_allclose(a.phi, b.phi, atol=1e-12, rtol=0)
    # hand values for the prediction game: v(0)=1.5, v({0})=0.5, v({1})=3, v({0,1})=2
    np.testing.assert_allclose(shapley_values(m, bg, x).phi, [-1.0, 1.5], atol=1e-12)


def test_oracle_single_player():
    m = TreeEnsemble("single", (stump(0, 0.0, -2.0, 5.0),), [1.0], 0.0, 1, 1)
    bg = np.array([[1.0], [2.0], [-3.0]])
    e = shapley_oracle(m, bg, [-1.0])
    v1 = eval_value_function(m, bg, [-1.0], None, (0,), "prediction")
    v0 = eval_value_function(m, bg, [-1.0], None, (), "prediction")
    assert e.phi[0] == pytest.approx(v1 - v0, abs=1e-15)


def test_oracle_symmetry():
    # average of two stumps that treat f0 and f1 identically
    m = ensemble([stump(0, 0.0, 0.0, 1.0), stump(1, 0.0, 0.0, 1.0)], n_features=2)
    bg = np.array([[-1.0, -1.0], [1.0, 1.0], [-1.0, 1.0], [1.0, -1.0]])
    e = shapley_oracle(m, bg, [2.0, 2.0])
    assert e.phi[0] == pytest.approx(e.phi[1], abs=1e-15)


@pytest.mark.parametrize("seed", range(10))
def test_fast_path_matches_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    L = int(rng.integers(1, 9))
    m = random_ensemble(rng, L, int(rng.integers(1, 5)), 3)
    bg = rng.normal(size=(int(rng.integers(1, 5)), L))
    x = rng.normal(size=L)
    for kind in ("prediction", "loss"):
        a = shapley_values(m, bg, x, rng.normal(), kind)
        b = shapley_oracle(m, bg, x, a.target, kind)
        assert np.max(np.abs(a.phi - b.phi)) <= 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_linearity_over_trees(seed):
    rng = np.random.default_rng(seed)
    m = random_ensemble(rng, 10, 8, 4)
    bg = rng.normal(size=(5, 10))
    x = rng.normal(size=10)
    whole = shapley_values(m, bg, x)
    parts = shapley_values_by_tree(m, bg, x)
    assert np.max(np.abs(whole.phi - parts.phi)) <= 1e-9
    assert parts.base_value == pytest.approx(whole.base_value, abs=1e-9)


def test_null_player_is_exactly_zero(rng):
    trees = [random_tree(rng, 6, 3, feature_pool=[0, 1, 4]) for _ in range(4)]
    m = ensemble(trees, n_features=6)
    bg = rng.normal(size=(5, 6))
    x = rng.normal(size=6)
    for kind in ("prediction", "loss"):
        e = shapley_values(m, bg, x, 0.0, kind)
        assert e.phi[2] == 0.0 and e.phi[3] == 0.0 and e.phi[5] == 0.0


def test_dummy_shift(rng):
    m = random_ensemble(rng, 6, 4, 3, kind="forest")
    c = 2.5
    shifted_trees = []
    for t in m.trees:
        shifted_trees.append(type(t)(t.feature, t.threshold, t.left, t.right, t.value + c, t.max_depth))
    shifted = TreeEnsemble("forest", tuple(shifted_trees), m.tree_weights, m.base_offset, 1, 6)
    bg = rng.normal(size=(5, 6))
    x = rng.normal(size=6)
    a = shapley_values(m, bg, x)
    b = shapley_values(shifted, bg, x)
    np.testing.assert_allclose(a.phi, b.phi, atol=1e-9, rtol=0)
    assert b.base_value == pytest.approx(a.base_value + c, abs=1e-9)


def test_limits(rng):
    m = random_ensemble(rng, 13, 2, 2)
    with pytest.raises(TooManyFeatures):
        shapley_oracle(m, rng.normal(size=(2, 13)), rng.normal(size=13))
    wide = random_ensemble(rng, 26, 2, 2)
    with pytest.raises(TooManyFeatures):
        shapley_values(wide, rng.normal(size=(2, 26)), rng.normal(size=26))
    with pytest.raises(MissingTarget):
        shapley_values(m, rng.normal(size=(2, 13)), rng.normal(size=13), kind="loss")


def test_coalition_table_agrees_with_value_function(rng):
    m = random_ensemble(rng, 5, 3, 3)
    bg = rng.normal(size=(3, 5))
    x = rng.normal(size=5)
    v, relevant = coalition_table(m, bg, x, 0.2, "loss")
    for mask in range(v.size):
        S = [relevant[b] for b in range(len(relevant)) if (mask >> b) & 1]
        assert v[mask] == pytest.approx(eval_value_function(m, bg, x, 0.2, S, "loss"), abs=1e-12)


def test_real_model_at_fifteen_lags_is_efficient(rng):
    X = rng.normal(size=(120, 15))
    y = X[:, -1] - 0.5 * X[:, -3] + 0.1 * rng.normal(size=120)
    m = fit_gradient_boosting((X, y), 16, 4)
    bg = make_background(X, cap=25, seed=0)
    assert len(bg) == 25
    e = shapley_values(m, bg, X[3], y[3], "loss")
    assert abs(e.phi.sum() - (e.full_value - e.base_value)) <= 1e-9
    assert e.full_value == pytest.approx((predict(m, X[3]) - y[3]) ** 2, abs=1e-12)


def test_background_subsampling_is_seeded(rng):
    X = rng.normal(size=(100, 4))
    a = make_background(X, cap=10, seed=4)
    b = make_background(X, cap=10, seed=4)
    assert np.array_equal(a.rows, b.rows)
    assert make_background(X, cap=None).rows.shape == (100, 4)
