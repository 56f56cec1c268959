import datetime as dt

import numpy as np
import pytest

from plantstress.learn import (
    FitError,
    fit_forest,
    fit_hierarchical,
    fit_knn,
    fit_logistic,
    fit_resnet1d,
    fit_svm,
    predict_hierarchical,
)
from plantstress.learn.base import Standardizer, child_seeds
from plantstress.learn.hierarchical import TREATMENT_PAIR
from plantstress.learn.linear import logistic_loss_grad
from plantstress.learn.resnet1d import Arch, forward, init_params, loss_and_grads, softmax
from plantstress.learn.serialize import ModelFormatError, dumps, load_model, loads, save_model


def blobs(n=100, gap=4.0, seed=0, d=2):
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    X = rng.normal(size=(n, d))
    X[:, 0] += np.where(y == 1, gap / 2, -gap / 2)
    return X, y


def xor(n=200, seed=0):
    rng = np.random.default_rng(seed)
    centers = np.array([[0, 0], [0, 3], [3, 0], [3, 3]])
    c = rng.integers(0, 4, n)
    X = centers[c] + rng.normal(0, 0.3, (n, 2))
    y = np.array([0, 1, 1, 0])[c]
    return X, y


# -- linear -------------------------------------------------------------------

def test_svm_separable_training_accuracy():
    X, y = blobs(gap=8.0)
    m = fit_svm(X, y, seed=1)
    assert np.mean(m.predict(X) == y) == 1.0


def test_svm_deterministic_and_multiclass():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(90, 3)) + np.repeat(np.eye(3) * 5, 30, axis=0)
    y = np.repeat([0, 1, 2], 30)
    a, b = fit_svm(X, y, seed=5), fit_svm(X, y, seed=5)
    assert np.array_equal(a.weights, b.weights)
    assert np.mean(a.predict(X) == y) > 0.95


def test_svm_duplicated_data_same_decision():
    X, y = blobs(gap=6.0, seed=3)
    a = fit_svm(X, y, seed=0, epochs=200)
    b = fit_svm(np.vstack([X, X]), np.concatenate([y, y]), seed=0, epochs=100)
    # same objective, same number of SGD steps; shuffles differ, so compare decisions loosely
    Q = np.random.default_rng(4).normal(size=(200, 2)) * 3
    assert np.mean(a.predict(Q) == b.predict(Q)) > 0.95


def test_svm_identical_features_predicts_lowest_consistently():
    X = np.ones((20, 3))
    y = np.repeat([0, 1], 10)
    pred = fit_svm(X, y).predict(X)
    assert np.all(pred == pred[0])


def test_logistic_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(15, 4))
    Y = np.eye(3)[rng.integers(0, 3, 15)]
    W, b = rng.normal(size=(3, 4)), rng.normal(size=3)
    _, dW, db = logistic_loss_grad(W, b, X, Y, 0.1)
    eps = 1e-5
    for _ in range(10):
        i, j = rng.integers(3), rng.integers(4)
        Wp, Wm = W.copy(), W.copy()
        Wp[i, j] += eps
        Wm[i, j] -= eps
        num = (logistic_loss_grad(Wp, b, X, Y, 0.1)[0] - logistic_loss_grad(Wm, b, X, Y, 0.1)[0]) / (2 * eps)
        assert abs(num - dW[i, j]) <= 1e-4 * max(abs(num), abs(dW[i, j]), 1e-8)
    k = rng.integers(3)
    bp, bm = b.copy(), b.copy()
    bp[k] += eps
    bm[k] -= eps
    num = (logistic_loss_grad(W, bp, X, Y, 0.1)[0] - logistic_loss_grad(W, bm, X, Y, 0.1)[0]) / (2 * eps)
    assert num == pytest.approx(db[k], rel=1e-4)


def test_logistic_separable_and_null():
    X, y = blobs(n=200, gap=6.0, seed=6)
    m = fit_logistic(X[::2], y[::2])
    assert np.mean(m.predict(X[1::2]) == y[1::2]) >= 0.95
    rng = np.random.default_rng(7)
    Xn, yn = rng.normal(size=(400, 3)), np.repeat([0, 1], 200)
    rng.shuffle(yn)
    acc = np.mean(fit_logistic(Xn[:200], yn[:200]).predict(Xn[200:]) == yn[200:])
    assert 0.4 <= acc <= 0.6


# -- knn ----------------------------------------------------------------------

def test_knn_k1_memorizes():
    X, y = blobs(gap=0.5, seed=8)
    assert np.array_equal(fit_knn(X, y, k=1).predict(X), y)


def test_knn_tie_rules():
    X = np.array([[0.0], [2.0]])
    m = fit_knn(X, np.array([1, 0]), k=2)
    assert m.predict([[1.0]])[0] == 0  # equal votes and equal mean distance: lowest class
    assert m.predict([[0.5]])[0] == 1  # equal votes: class 1's voter is closer


def test_knn_k_equals_n_majority():
    X = np.random.default_rng(9).normal(size=(21, 2))
    y = np.r_[np.zeros(12, int), np.ones(9, int)]
    m = fit_knn(X, y, k=21)
    assert np.all(m.predict(np.random.default_rng(0).normal(size=(30, 2)) * 10) == 0)


# -- forest -------------------------------------------------------------------

def test_forest_xor_and_determinism():
    X, y = xor(400, seed=10)
    m = fit_forest(X[:200], y[:200], n_trees=30, seed=3)
    assert np.mean(m.predict(X[200:]) == y[200:]) >= 0.95
    m2 = fit_forest(X[:200], y[:200], n_trees=30, seed=3)
    Q = np.random.default_rng(1).normal(size=(50, 2)) * 3
    assert np.array_equal(m.predict(Q), m2.predict(Q))


def test_forest_single_class():
    X = np.random.default_rng(11).normal(size=(10, 2))
    m = fit_forest(X, np.full(10, 3), n_trees=5)
    assert np.all(m.predict(np.random.default_rng(2).normal(size=(7, 2))) == 3)


# -- resnet -------------------------------------------------------------------

def test_resnet_gradients_tiny_network():
    arch = Arch(in_channels=2, length=8, n_blocks=1, filters=2, kernel=3, n_classes=2)
    rng = np.random.default_rng(12)
    params = init_params(arch, rng)
    for k in params:
        params[k] = params[k] + rng.normal(0, 0.1, params[k].shape)
    x = rng.normal(size=(4, 8, 2))
    y = np.array([0, 1, 1, 0])
    _, grads = loss_and_grads(params, x, y, arch)
    eps = 1e-5
    worst = 0.0
    keys = sorted(params)
    for t in range(12):
        k = keys[t % len(keys)]
        idx = tuple(rng.integers(0, s) for s in params[k].shape)
        old = params[k][idx]
        params[k][idx] = old + eps
        lp = loss_and_grads(params, x, y, arch)[0]
        params[k][idx] = old - eps
        lm = loss_and_grads(params, x, y, arch)[0]
        params[k][idx] = old
        num = (lp - lm) / (2 * eps)
        ana = grads[k][idx]
        worst = max(worst, abs(num - ana) / max(abs(num), abs(ana), 1e-7))
    assert worst < 1e-4


def test_resnet_uniform_softmax_on_zero_input():
    arch = Arch()
    params = init_params(arch, np.random.default_rng(0))
    logits = forward(params, np.zeros((3, 48, 2)), arch)
    logits = logits[0] if isinstance(logits, tuple) else logits
    assert np.allclose(softmax(logits), 0.5, atol=1e-6)


def test_resnet_learns_shape_and_rejects_bad_input():
    rng = np.random.default_rng(13)
    t = np.linspace(0, 1, 48)
    y = np.repeat([0, 1], 40)
    base = np.where(y[:, None] == 1, np.exp(-8 * t), np.exp(-2 * t))
    x = np.stack([base, base[:, ::-1]], axis=2) + rng.normal(0, 0.05, (80, 48, 2))
    m = fit_resnet1d(x[::2], y[::2], epochs=8, seed=0)
    assert np.mean(m.predict(x[1::2]) == y[1::2]) >= 0.9
    with pytest.raises(ValueError):
        fit_resnet1d(x[:, :, 0], y)


# -- hierarchical -------------------------------------------------------------

@pytest.fixture(scope="module")
def small_windows():
    from plantstress.pipeline import split, synthetic_windows
    from plantstress.synth import SynthConfig
    ws = synthetic_windows(SynthConfig(n_plants_per_cell=2, start_date=dt.date(2024, 2, 20)))
    return split(ws)


def test_hierarchical_consistency_and_bound(small_windows):
    train, test = small_windows
    m = fit_hierarchical(train.X, train.y, "logistic", "knn", seed=1)
    pairs, pred = m.predict_detail(test.X)
    assert np.array_equal(TREATMENT_PAIR[pred], pairs)
    assert np.mean(pred == test.y) <= np.mean(pairs == test.pairs)
    assert predict_hierarchical(m, test.X[0]) == pred[0]
    _, noisy = m.predict_detail(test.X, noise_sigma=0.5, seed=3)
    assert np.array_equal(TREATMENT_PAIR[noisy], m.predict_detail(test.X, 0.5, 3)[0])


def test_feature_set_switch_keeps_level1(small_windows):
    train, test = small_windows
    a = fit_hierarchical(train.X, train.y, "logistic", "forest", "f2", seed=2)
    b = fit_hierarchical(train.X, train.y, "logistic", "forest", "f4", seed=2)
    assert np.array_equal(a.predict_pairs(test.X), b.predict_pairs(test.X))


def test_hierarchical_requires_both_pairs(small_windows):
    train, _ = small_windows
    keep = TREATMENT_PAIR[train.y] == 0
    with pytest.raises(FitError):
        fit_hierarchical(train.X[keep], train.y[keep], "logistic")


def test_serialization_roundtrip(small_windows, tmp_path):
    train, test = small_windows
    models = [
        fit_hierarchical(train.X, train.y, "resnet", "forest", seed=4, level1_hyper={"epochs": 1}),
        fit_hierarchical(train.X, train.y, "logistic", "svm", seed=4),
        fit_hierarchical(train.X, train.y, "logistic", "knn", "f4", seed=4),
    ]
    for m in models:
        path = tmp_path / "m.json"
        save_model(m, path, {"note": "x"})
        back, meta = load_model(path)
        assert meta == {"note": "x"}
        assert np.array_equal(back.predict(test.X), m.predict(test.X))
        assert dumps(back, meta) == dumps(m, meta)
    with pytest.raises(ModelFormatError):
        loads('{"format": "other"}')


def test_standardizer_and_child_seeds():
    s = Standardizer.fit(np.array([[1.0, 5.0], [3.0, 5.0]]))
    assert np.allclose(s.transform(np.array([[2.0, 5.0]])), [[0.0, 0.0]])
    assert child_seeds(1, 3) == child_seeds(1, 3) and len(set(child_seeds(1, 3))) == 3
