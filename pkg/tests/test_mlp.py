import numpy as np
import pytest

from toxscreen import mlp
from toxscreen.mlp import (EmptyMaskError, MlpConfig, NetworkParams, forward,
                           init_params, load_params, loss_and_gradients,
                           make_dropout_masks, masked_bce, save_params,
                           train_mlp)


def naive_masked_bce(y, p):
    terms = []
    for yi, pi in zip(np.ravel(y), np.ravel(p)):
        if yi < 0:
            continue
        pi = min(max(pi, mlp.EPS), 1 - mlp.EPS)
        terms.append(-(yi * np.log(pi) + (1 - yi) * np.log(1 - pi)))
    return float(np.mean(terms))


def test_masked_bce_matches_naive():
    rng = np.random.default_rng(0)
    y = rng.integers(-1, 2, size=(6, 4))
    p = rng.random((6, 4))
    loss, _ = masked_bce(y, p)
    assert loss == pytest.approx(naive_masked_bce(y, p), rel=1e-12)


def test_masked_bce_ignores_missing():
    y = np.array([[1, -1], [0, -1]])
    p = np.array([[0.8, 0.123], [0.2, 0.999]])
    loss, grad = masked_bce(y, p)
    expected = -(np.log(0.8) + np.log(0.8)) / 2
    assert loss == pytest.approx(expected)
    assert grad[0, 1] == 0.0 and grad[1, 1] == 0.0


def test_masked_bce_all_missing_raises():
    with pytest.raises(EmptyMaskError):
        masked_bce(np.full((2, 2), -1), np.full((2, 2), 0.5))


def test_masked_bce_gradient_by_finite_differences():
    rng = np.random.default_rng(1)
    y = np.array([[1, 0, -1], [0, 1, 1]])
    p = rng.uniform(0.1, 0.9, size=(2, 3))
    _, grad = masked_bce(y, p)
    eps = 1e-7
    for i in range(2):
        for j in range(3):
            dp = np.zeros_like(p)
            dp[i, j] = eps
            num = (masked_bce(y, p + dp)[0] - masked_bce(y, p - dp)[0]) / (2 * eps)
            assert grad[i, j] == pytest.approx(num, rel=1e-5, abs=1e-8)


def test_dropout_masks_inverted_scale():
    rng = np.random.default_rng(2)
    params = init_params([4, 8, 8, 2], rng)
    masks = make_dropout_masks(params, 100, 0.5, rng)
    assert len(masks) == 2
    for mask in masks:
        assert set(np.unique(mask)) <= {0.0, 2.0}
    # zero rate keeps everything
    for mask in make_dropout_masks(params, 10, 0.0, rng):
        assert np.all(mask == 1.0)


def test_forward_shapes_and_range():
    rng = np.random.default_rng(3)
    params = init_params([5, 8, 3], rng)
    out = forward(params, rng.random((7, 5)))
    assert out.shape == (7, 3)
    assert np.all((out > 0) & (out < 1))


def grad_check(params, X, y, masks=None, n_coords=40, rel_tol=1e-4):
    loss, grads = loss_and_gradients(params, X, y, masks)
    flat = params.flatten()
    gflat = grads.flatten()
    rng = np.random.default_rng(99)
    coords = rng.choice(len(flat), size=min(n_coords, len(flat)),
                        replace=False)
    eps = 1e-6
    worst = 0.0
    for c in coords:
        bump = np.zeros_like(flat)
        bump[c] = eps
        lp, _ = loss_and_gradients(params.unflatten(flat + bump), X, y, masks)
        lm, _ = loss_and_gradients(params.unflatten(flat - bump), X, y, masks)
        num = (lp - lm) / (2 * eps)
        denom = max(abs(num), abs(gflat[c]), 1e-8)
        worst = max(worst, abs(num - gflat[c]) / denom)
    return worst


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(4)
    params = init_params([6, 8, 8, 3], rng)
    X = rng.standard_normal((10, 6))
    y = rng.integers(-1, 2, size=(10, 3))
    assert grad_check(params, X, y) < 1e-4


def test_gradients_with_dropout_masks():
    rng = np.random.default_rng(5)
    params = init_params([6, 8, 8, 3], rng)
    X = rng.standard_normal((10, 6))
    y = rng.integers(-1, 2, size=(10, 3))
    masks = make_dropout_masks(params, 10, 0.5, rng)
    assert grad_check(params, X, y, masks) < 1e-4


def test_missing_labels_do_not_move_parameters():
    rng = np.random.default_rng(6)
    params = init_params([4, 8, 2], rng)
    X = rng.standard_normal((6, 4))
    y = np.column_stack([rng.integers(0, 2, 6), np.full(6, -1)])
    _, grads = loss_and_gradients(params, X, y)
    # the head weights feeding only the missing target receive zero gradient
    assert np.allclose(grads.weights[-1][:, 1], 0.0)
    assert grads.biases[-1][1] == 0.0


def test_training_learns_separable_problem():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((300, 6))
    y = (X[:, 0] > 0).astype(int)[:, None]
    config = MlpConfig(layers=2, width=16, dropout=0.0, batch_size=64,
                       max_epochs=60, patience=10, seed=0)
    params = train_mlp((X, y), None, config)
    preds = forward(params, X)[:, 0]
    accuracy = ((preds > 0.5).astype(int) == y[:, 0]).mean()
    assert accuracy > 0.9


def test_training_is_deterministic():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((80, 4))
    y = rng.integers(0, 2, size=(80, 2))
    config = MlpConfig(layers=2, width=8, dropout=0.5, batch_size=32,
                       max_epochs=5, seed=3)
    a = train_mlp((X, y), None, config)
    b = train_mlp((X, y), None, config)
    assert np.array_equal(a.flatten(), b.flatten())


def test_config_validation():
    with pytest.raises(ValueError):
        MlpConfig(dropout=1.0)
    with pytest.raises(ValueError):
        MlpConfig(batch_size=0)


def test_grid_defaults_carried():
    config = MlpConfig()
    assert config.width_grid == (256, 516, 1024)
    assert config.layer_grid == (2, 3)


def test_persistence_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(9)
    params = init_params([5, 7, 3], rng)
    path = tmp_path / "params.txt"
    save_params(params, path)
    again = load_params(path)
    assert np.array_equal(again.flatten(), params.flatten())


def test_load_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("nope\n")
    with pytest.raises(ValueError, match="not an mlp"):
        load_params(path)
