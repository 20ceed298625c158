import numpy as np
import pytest
from hypothesis import given, strategies as st

from rbc.classify import (ClassifyError, MLPModel, TrainConfig, evaluate, forward,
                          gradient_check, init_model, loss_and_grads, nearest_centroid,
                          predict, repeat_runs, softmax, stratified_split, train)
from rbc.qd import Dataset


def toy(n=100, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, size=(n, 4))
    y = (X[:, 0] + X[:, 1] > 1.0).astype(int)
    keep = np.abs(X[:, 0] + X[:, 1] - 1.0) > 0.1  # margin keeps it separable
    return Dataset(X[keep], y[keep], ["A", "B"], 4, 1.0, 0.0, seed)


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=8))
def test_softmax_is_distribution(z):
    p = softmax(np.array([z]))
    assert p.sum() == pytest.approx(1.0) and np.all(p >= 0)


def test_zero_model_is_uniform():
    m = init_model([6, 8, 5], seed=0)
    for W in m.weights:
        W[:] = 0
    for b in m.biases:
        b[:] = 0
    assert np.allclose(forward(m, np.random.default_rng(0).uniform(size=(3, 6))), 0.2)


def test_predict_is_argmax():
    m = init_model([4, 8, 3], seed=1)
    X = np.random.default_rng(1).uniform(size=(10, 4))
    assert np.array_equal(predict(m, X), np.argmax(forward(m, X), axis=1))


def test_input_width_checked():
    with pytest.raises(ClassifyError):
        forward(init_model([4, 3], seed=0), np.zeros((1, 5)))


def test_separable_toy_reaches_full_accuracy():
    d = toy()
    cfg = TrainConfig(epochs=50, hidden=(16,), seed=0, learning_rate=0.05)
    res = train(d, cfg)
    assert evaluate(res.model, d).accuracy == 1.0


def test_training_is_deterministic():
    d = toy()
    cfg = TrainConfig(epochs=5, hidden=(8,), seed=3)
    a, b = train(d, cfg), train(d, cfg)
    for Wa, Wb in zip(a.model.weights, b.model.weights):
        assert np.array_equal(Wa, Wb)


def test_gradient_check():
    d = toy()
    m = init_model([4, 16, 8, 2], seed=2, activation="tanh")
    errs = gradient_check(m, d.features, d.labels, probes=100, seed=0)
    assert max(errs) < 1e-5
    m = init_model([4, 16, 8, 2], seed=2)
    assert max(gradient_check(m, d.features, d.labels, probes=100, seed=1)) < 1e-5


def test_loss_is_mean_cross_entropy():
    m = init_model([4, 3], seed=0)
    X = np.random.default_rng(0).uniform(size=(5, 4))
    y = np.array([0, 1, 2, 0, 1])
    loss, _, _ = loss_and_grads(m, X, y)
    p = forward(m, X)
    assert loss == pytest.approx(-np.mean(np.log(p[np.arange(5), y])))


def test_stratified_split_keeps_proportions():
    y = np.repeat([0, 1], [80, 20])
    tr, te = stratified_split(y, 0.8, seed=0)
    assert np.bincount(y[tr]).tolist() == [64, 16]
    assert len(set(tr) & set(te)) == 0 and len(tr) + len(te) == 100


def test_nearest_centroid_cases():
    X = np.array([[0.0, 0.0], [1.0, 1.0]])
    d = Dataset(X, np.array([0, 1]), ["A", "B"], 2, 1.0, 0.0, 0)
    assert nearest_centroid(d, d).accuracy == 1.0
    rng = np.random.default_rng(0)
    bounded = rng.uniform(0.1, 0.6, size=(30, 6))
    opened = np.ones((30, 6))
    d = Dataset(np.vstack([bounded, opened]), np.repeat([0, 1], 30), ["C1", "C5"], 6, 1.0, 0.0, 0)
    assert nearest_centroid(d, d).accuracy == 1.0


def test_model_round_trip():
    m = init_model([4, 8, 2], seed=0)
    n = MLPModel.from_dict(m.to_dict())
    X = np.random.default_rng(0).uniform(size=(3, 4))
    assert np.array_equal(forward(m, X), forward(n, X))


def test_repeat_runs_reports_spread():
    rep = repeat_runs(3, toy(), TrainConfig(epochs=5, hidden=(8,)), seed=0)
    assert len(rep.accuracies) == 3 and rep.std >= 0
    assert len(rep.baseline_accuracies) == 3
