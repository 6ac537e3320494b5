import math

import numpy as np
import pytest

from oracles import brute_force_tree, tree_to_tuples
from toxscreen import gbm
from toxscreen.gbm import (GbmConfig, Tree, build_tree, find_best_split,
                           load_gbm, predict_gbm, save_gbm, stack_tasks,
                           train_gbm)


def make_instance(rng, n_rows=None, n_features=None):
    """Balanced labels keep round-1 gradients at exactly +-0.5."""
    n = int(n_rows if n_rows is not None else rng.integers(3, 26) * 2)
    d = int(n_features if n_features is not None else rng.integers(1, 6))
    X = rng.integers(0, 8, size=(n, d)).astype(float)
    X[rng.random((n, d)) < 0.1] = np.nan
    y = np.array([0, 1] * (n // 2), dtype=float)
    rng.shuffle(y)
    return X, y


def test_hand_computed_stump():
    # perfectly separable 4 rows, 1 round, eta 1, no regularization:
    # leaf weights are -G/H = +-2, so scores are sigmoid(+-2)
    X = np.array([[0.0], [0.0], [1.0], [1.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    config = GbmConfig(n_rounds=1, max_depth=2, eta=1.0, reg_lambda=0.0,
                       min_child_hessian=0.0)
    model = train_gbm(X, y, config)
    scores = predict_gbm(model, X)
    assert scores[0] == pytest.approx(1 / (1 + math.exp(2)), abs=1e-12)
    assert scores[2] == pytest.approx(1 / (1 + math.exp(-2)), abs=1e-12)


def test_tree_matches_brute_force_small():
    rng = np.random.default_rng(0)
    for _ in range(30):
        X, y = make_instance(rng)
        config = GbmConfig(n_rounds=1, max_depth=3, eta=0.3,
                           min_child_hessian=0.25)
        model = train_gbm(X, y, config)
        g = 0.5 - y
        h = np.full(len(y), 0.25)
        oracle = brute_force_tree(X, g, h, 3, config.reg_lambda, 0.25)
        assert tree_to_tuples(model.trees[0]) == oracle


def test_find_best_split_tie_breaks_lowest_feature():
    # two identical features: the split must use feature 0
    X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    g = np.array([0.5, 0.5, -0.5, -0.5])
    h = np.full(4, 0.25)
    cand = find_best_split(X, g, h, np.arange(4), 1.0, 0.25,
                           np.zeros(2, int), -np.inf, np.inf)
    assert cand.feature == 0


def test_find_best_split_prefers_missing_left_on_tie():
    X = np.array([[0.0], [1.0], [0.0], [1.0]])
    g = np.array([0.5, -0.5, 0.5, -0.5])
    h = np.full(4, 0.25)
    cand = find_best_split(X, g, h, np.arange(4), 1.0, 0.25,
                           np.zeros(1, int), -np.inf, np.inf)
    assert cand.missing_left is True  # no missing values: tie kept left


def test_missing_values_routed_by_gain():
    # NaN rows carry positive labels; sending them right (with the other
    # positives) yields the higher gain
    X = np.array([[0.0], [0.0], [np.nan], [1.0], [1.0], [np.nan]])
    y = np.array([0.0, 0.0, 1.0, 1.0, 1.0, 1.0])
    g = 0.5 - y
    h = np.full(6, 0.25)
    cand = find_best_split(X, g, h, np.arange(6), 1.0, 0.25,
                           np.zeros(1, int), -np.inf, np.inf)
    assert cand.missing_left is False
    tree = build_tree(X, g, h, GbmConfig(n_rounds=1, max_depth=2,
                                         min_child_hessian=0.25),
                      np.zeros(1, int))
    raw = tree.predict_raw(X)
    assert raw[2] == raw[3]  # NaN row lands in the right (positive) leaf


def test_no_split_on_constant_feature():
    X = np.ones((4, 1))
    g = np.array([0.5, -0.5, 0.5, -0.5])
    h = np.full(4, 0.25)
    assert find_best_split(X, g, h, np.arange(4), 1.0, 0.25,
                           np.zeros(1, int), -np.inf, np.inf) is None


def test_monotone_constraint_holds():
    rng = np.random.default_rng(1)
    n = 400
    X = rng.random((n, 2))
    y = (X[:, 0] + 0.2 * rng.standard_normal(n) > 0.5).astype(float)
    config = GbmConfig(n_rounds=30, max_depth=3, eta=0.2,
                       min_child_hessian=0.25)
    model = train_gbm(X, y, config, monotone=[1, 0])
    grid = np.linspace(0, 1, 200)
    for x2 in (0.1, 0.5, 0.9):
        probe = np.column_stack([grid, np.full_like(grid, x2)])
        scores = predict_gbm(model, probe)
        assert np.all(np.diff(scores) >= -1e-12)


def test_input_validation():
    X = np.array([[0.0], [1.0]])
    with pytest.raises(ValueError, match="single class"):
        train_gbm(X, np.array([1.0, 1.0]))
    with pytest.raises(ValueError, match="infinite"):
        train_gbm(np.array([[np.inf], [0.0]]), np.array([0.0, 1.0]))
    with pytest.raises(ValueError, match="monotone"):
        train_gbm(X, np.array([0.0, 1.0]), monotone=[1, 1, 1])
    with pytest.raises(ValueError):
        GbmConfig(eta=0.0)


def test_early_stopping_truncates_to_best_prefix():
    rng = np.random.default_rng(2)
    X = rng.random((200, 3))
    y = (X[:, 0] > 0.5).astype(float)
    Xv = rng.random((80, 3))
    yv = (rng.random(80) > 0.5).astype(float)  # valid labels are pure noise
    config = GbmConfig(n_rounds=200, max_depth=2, eta=0.3, patience=5,
                       min_child_hessian=0.25)
    model = train_gbm(X, y, config, valid=(Xv, yv))
    assert len(model.trees) < 200
    assert model.best_round == len(model.trees) - 1
    assert np.argmin(model.valid_log) == model.best_round


def test_predict_schema_mismatch():
    X = np.array([[0.0], [1.0], [0.0], [1.0]])
    y = np.array([0.0, 1.0, 0.0, 1.0])
    model = train_gbm(X, y, GbmConfig(n_rounds=2, max_depth=2,
                                      min_child_hessian=0.25))
    with pytest.raises(ValueError, match="schema mismatch"):
        predict_gbm(model, np.zeros((2, 3)))


def test_stack_tasks():
    features = np.array([[1.0, 2.0], [3.0, 4.0]])
    labels = np.array([[1, -1], [0, 1]])
    X, y, pairs = stack_tasks(features, labels)
    assert X.tolist() == [[1.0, 2.0, 0.0], [3.0, 4.0, 0.0], [3.0, 4.0, 1.0]]
    assert y.tolist() == [1.0, 0.0, 1.0]
    assert pairs.tolist() == [[0, 0], [1, 0], [1, 1]]


def test_persistence_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(3)
    X = rng.random((100, 4))
    y = (X[:, 1] > 0.5).astype(float)
    model = train_gbm(X, y, GbmConfig(n_rounds=10, max_depth=3,
                                      min_child_hessian=0.25),
                      monotone=[0, 1, 0, 0])
    path = tmp_path / "model.txt"
    save_gbm(model, path)
    again = load_gbm(path)
    assert again.base_score == model.base_score
    assert again.monotone == model.monotone
    assert len(again.trees) == len(model.trees)
    Xp = rng.random((50, 4))
    assert np.array_equal(predict_gbm(again, Xp), predict_gbm(model, Xp))


def test_load_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("something else\n")
    with pytest.raises(ValueError, match="not a gbm"):
        load_gbm(path)


def test_gain_importance_sums_to_one():
    rng = np.random.default_rng(4)
    X = rng.random((200, 3))
    y = (X[:, 2] > 0.5).astype(float)
    model = train_gbm(X, y, GbmConfig(n_rounds=10, max_depth=3,
                                      min_child_hessian=0.25))
    gains = gbm.gain_importance(model)
    assert gains.sum() == pytest.approx(1.0)
    assert gains.argmax() == 2
