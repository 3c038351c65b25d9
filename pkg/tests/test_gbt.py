"""Boosted-tree training against hand arithmetic and split enumeration."""

import numpy as np
import pytest
from scipy.special import expit

from ppgscreen.errors import (
    LengthMismatchError,
    NonFiniteError,
    SingleClassError,
)
from ppgscreen.models import (
    ClassWeights,
    GbtModel,
    Tree,
    load_model,
    predict_gbt,
    save_model,
    train_gbt,
)

HAND_X = np.array([[0.0], [1.0]])
HAND_Y = np.array([0, 1])


def enumerate_split(X, g, h, lam):
    """All (feature, midpoint) candidates by direct masked sums; first
    strict maximum wins, scanning features then thresholds ascending."""
    G, H = g.sum(), h.sum()
    parent = G**2 / (H + lam)
    best = None
    for j in range(X.shape[1]):
        vals = np.unique(X[:, j])
        for lo, hi in zip(vals, vals[1:]):
            t = 0.5 * (lo + hi)
            mask = X[:, j] < t
            GL, HL = g[mask].sum(), h[mask].sum()
            GR, HR = g[~mask].sum(), h[~mask].sum()
            gain = 0.5 * (GL**2 / (HL + lam) + GR**2 / (HR + lam) - parent)
            if gain > 0.0 and (best is None or gain > best[0]):
                best = (gain, j, t)
    return best


def enumerate_tree(X, g, h, lam, depth_left):
    value = -g.sum() / (h.sum() + lam)
    if depth_left == 0 or X.shape[0] < 2:
        return ("leaf", value)
    best = enumerate_split(X, g, h, lam)
    if best is None:
        return ("leaf", value)
    _, j, t = best
    mask = X[:, j] < t
    return ("split", j, t,
            enumerate_tree(X[mask], g[mask], h[mask], lam, depth_left - 1),
            enumerate_tree(X[~mask], g[~mask], h[~mask], lam, depth_left - 1))


def to_nested(tree, node=0):
    if tree.feature[node] < 0:
        return ("leaf", float(tree.value[node]))
    return ("split", int(tree.feature[node]), float(tree.threshold[node]),
            to_nested(tree, int(tree.left[node])),
            to_nested(tree, int(tree.right[node])))


def nested_equal(a, b, tol=1e-12):
    if a[0] != b[0]:
        return False
    if a[0] == "leaf":
        return abs(a[1] - b[1]) <= tol
    return (a[1] == b[1] and abs(a[2] - b[2]) <= tol
            and nested_equal(a[3], b[3], tol) and nested_equal(a[4], b[4], tol))


class TestHandExample:
    def test_single_round_stump(self):
        model = train_gbt(HAND_X, HAND_Y, rounds=1, max_depth=1)
        assert model.base_score == 0.0
        assert len(model.trees) == 1
        tree = model.trees[0]
        assert tree.n_nodes == 3
        assert tree.feature[0] == 0
        assert tree.threshold[0] == 0.5
        left, right = int(tree.left[0]), int(tree.right[0])
        assert tree.value[left] == pytest.approx(-0.4, abs=1e-12)
        assert tree.value[right] == pytest.approx(0.4, abs=1e-12)

    def test_prediction_after_learning_rate(self):
        model = train_gbt(HAND_X, HAND_Y, rounds=1, max_depth=1)
        assert predict_gbt(model, np.array([1.0])) == \
            pytest.approx(expit(0.04), abs=1e-12)
        assert predict_gbt(model, np.array([0.0])) == \
            pytest.approx(expit(-0.04), abs=1e-12)

    def test_empty_ensemble_is_prior(self):
        model = GbtModel(trees=(), base_score=0.0, learning_rate=0.1,
                         max_depth=30, leaf_penalty=1.0, min_child_count=1,
                         n_features=2, loss_history=())
        assert np.all(predict_gbt(model, np.zeros((3, 2))) == 0.5)

    def test_tree_order_does_not_matter(self):
        model = train_gbt(HAND_X, HAND_Y, rounds=2, max_depth=1)
        flipped = GbtModel(trees=model.trees[::-1], base_score=model.base_score,
                           learning_rate=0.1, max_depth=30, leaf_penalty=1.0,
                           min_child_count=1, n_features=1,
                           loss_history=model.loss_history)
        assert np.array_equal(predict_gbt(model, HAND_X),
                              predict_gbt(flipped, HAND_X))


class TestTreeGrowth:
    def test_pure_children_become_leaves(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0, 0, 1, 1])
        model = train_gbt(X, y, rounds=1, max_depth=3)
        tree = model.trees[0]
        assert tree.n_nodes == 3
        assert tree.threshold[0] == 1.5
        assert tree.value[int(tree.left[0])] < 0
        assert tree.value[int(tree.right[0])] > 0

    def test_min_child_count_restricts_split(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0, 1, 1, 1])
        loose = train_gbt(X, y, rounds=1, max_depth=1)
        assert loose.trees[0].threshold[0] == 0.5
        tight = train_gbt(X, y, rounds=1, max_depth=1, min_child_count=2)
        assert tight.trees[0].threshold[0] == 1.5

    def test_depth_limit_holds(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(64, 3))
        y = (rng.random(64) < 0.5).astype(int)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        model = train_gbt(X, y, rounds=3, max_depth=2)
        assert all(tree.depth() <= 2 for tree in model.trees)

    def test_training_loss_never_increases(self):
        rng = np.random.default_rng(12)
        X = rng.normal(size=(40, 2))
        y = (X[:, 0] + 0.3 * rng.normal(size=40) > 0).astype(int)
        cw = ClassWeights(1.2, 0.9)
        model = train_gbt(X, y, cw, rounds=30, max_depth=3)
        hist = model.loss_history
        assert len(hist) == 31
        for before, after in zip(hist, hist[1:]):
            assert after <= before + 1e-12

    def test_ties_prefer_lowest_feature(self):
        # identical columns: gains tie on every split, feature 0 must win
        col = np.array([0.0, 1.0, 2.0, 3.0])
        X = np.column_stack([col, col])
        y = np.array([0, 0, 1, 1])
        model = train_gbt(X, y, rounds=1, max_depth=1)
        assert model.trees[0].feature[0] == 0


class TestEnumerationOracle:
    def test_greedy_matches_enumeration(self):
        rng = np.random.default_rng(31)
        for trial in range(20):
            n = int(rng.integers(2, 9))
            d = int(rng.integers(1, 3))
            depth = int(rng.integers(1, 3))
            X = np.round(rng.normal(size=(n, d)), 3)
            y = rng.integers(0, 2, size=n)
            if y.min() == y.max():
                y[rng.integers(0, n)] = 1 - y[0]
            model = train_gbt(X, y.astype(int), rounds=1, max_depth=depth)
            p = expit(np.full(n, model.base_score))
            g = p - y
            h = p * (1.0 - p)
            expected = enumerate_tree(X, g, h, 1.0, depth)
            got = to_nested(model.trees[0])
            assert nested_equal(got, expected), f"trial {trial}"


class TestValidation:
    def test_single_class_rejected(self):
        with pytest.raises(SingleClassError):
            train_gbt(np.zeros((3, 1)), np.zeros(3))

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteError):
            train_gbt(np.array([[np.inf], [0.0]]), np.array([0, 1]))

    def test_predict_length_mismatch(self):
        model = train_gbt(HAND_X, HAND_Y, rounds=1)
        with pytest.raises(LengthMismatchError):
            predict_gbt(model, np.zeros(3))

    def test_zero_rounds_predicts_prior(self):
        model = train_gbt(HAND_X, HAND_Y, rounds=0)
        assert len(model.trees) == 0
        assert np.all(predict_gbt(model, HAND_X) == 0.5)

    def test_determinism(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(30, 4))
        y = (X[:, 1] > 0).astype(int)
        a = train_gbt(X, y, rounds=5, max_depth=3)
        b = train_gbt(X, y, rounds=5, max_depth=3)
        assert np.array_equal(predict_gbt(a, X), predict_gbt(b, X))
        assert a.loss_history == b.loss_history


class TestTreeMechanics:
    def test_routing_below_goes_left(self):
        tree = Tree(feature=[0, -1, -1], threshold=[2.0, np.nan, np.nan],
                    left=[1, -1, -1], right=[2, -1, -1],
                    value=[0.0, -1.0, 1.0])
        out = tree.predict(np.array([[1.9], [2.0], [2.1]]))
        assert out.tolist() == [-1.0, 1.0, 1.0]

    def test_serialization_round_trip(self, tmp_path):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(30, 3))
        y = (X[:, 0] - X[:, 2] > 0).astype(int)
        model = train_gbt(X, y, rounds=5, max_depth=4)
        path = tmp_path / "gbt.json"
        save_model(model, path)
        back = load_model(path)
        assert isinstance(back, GbtModel)
        assert back.base_score == model.base_score
        assert back.loss_history == model.loss_history
        assert len(back.trees) == len(model.trees)
        for ta, tb in zip(back.trees, model.trees):
            assert np.array_equal(ta.feature, tb.feature)
            assert np.array_equal(ta.threshold, tb.threshold, equal_nan=True)
            assert np.array_equal(ta.value, tb.value)
        probe = rng.normal(size=(12, 3))
        assert np.array_equal(predict_gbt(back, probe),
                              predict_gbt(model, probe))
