import numpy as np
import pytest

from polarml.errors import TrainingDivergedError
from polarml.models import TrainConfig, train_mlp
from polarml.models.mlp import Adam, MlpModel, forward, init_parameters, loss_and_gradients
from polarml.rng import stream


def _data(seed=0, m=40, n=3):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(m, n))
    return X, X.sum(axis=1)


def _params(seed, n_in=4, n_hidden=5):
    p = init_parameters(n_in, n_hidden, stream(seed, "init"))
    # nonzero biases so the gradient check also covers them
    rng = np.random.default_rng(seed)
    p["b1"] = rng.normal(scale=0.1, size=n_hidden)
    p["b2"] = rng.normal(scale=0.1, size=1)
    return p


def test_zero_network_predicts_zero():
    p = {"W1": np.zeros((3, 5)), "b1": np.zeros(5), "W2": np.zeros((5, 1)), "b2": np.zeros(1)}
    np.testing.assert_array_equal(forward(p, np.ones((4, 3))), np.zeros(4))


def test_hand_network():
    # hidden = relu((1, 2) @ I + (0.5, -3)) = (1.5, 0); output = 1.5 + 0 + 1
    p = {"W1": np.eye(2), "b1": np.array([0.5, -3.0]), "W2": np.ones((2, 1)), "b2": np.ones(1)}
    assert forward(p, np.array([[1.0, 2.0]]))[0] == 2.5


def test_glorot_limits():
    p = init_parameters(9, 5, stream(0, "init"))
    assert np.all(np.abs(p["W1"]) <= np.sqrt(6 / 14))
    assert np.all(np.abs(p["W2"]) <= np.sqrt(6 / 6))
    assert not p["b1"].any() and not p["b2"].any()


@pytest.mark.parametrize("use_mask", [False, True])
def test_gradients_match_central_differences(use_mask):
    rng = np.random.default_rng(1)
    X = rng.uniform(size=(7, 4))
    y = rng.normal(size=7)
    p = _params(3)
    mask = (rng.random((7, 5)) < 0.8) / 0.8 if use_mask else None
    _, grads = loss_and_gradients(p, X, y, mask)
    h = 1e-5
    for name, g in grads.items():
        for idx in np.ndindex(g.shape):
            plus = {k: v.copy() for k, v in p.items()}
            minus = {k: v.copy() for k, v in p.items()}
            plus[name][idx] += h
            minus[name][idx] -= h
            fd = (loss_and_gradients(plus, X, y, mask)[0]
                  - loss_and_gradients(minus, X, y, mask)[0]) / (2 * h)
            assert abs(fd - g[idx]) <= 1e-4 * max(1.0, abs(fd))


def test_adam_ignores_zero_gradient():
    p = {"w": np.array([1.0, -2.0])}
    opt = Adam(p)
    for _ in range(5):
        p = opt.step(p, {"w": np.zeros(2)})
    np.testing.assert_array_equal(p["w"], [1.0, -2.0])


def test_adam_first_step_size():
    # folded correction: step = lr sqrt(1 - b2) / (1 - b1) * m / (sqrt(v) + eps), close to lr
    p = {"w": np.array([0.0])}
    p = Adam(p, learning_rate=0.01).step(p, {"w": np.array([3.0])})
    want = 0.01 * np.sqrt(0.001) / 0.1 * 0.3 / (np.sqrt(0.009) + 1e-7)
    assert p["w"][0] == pytest.approx(-want, rel=1e-14)
    assert p["w"][0] == pytest.approx(-0.01, rel=1e-5)


def test_adam_descends_quadratic():
    p = {"w": np.array([5.0, -3.0])}
    opt = Adam(p, learning_rate=0.1)
    for _ in range(500):
        p = opt.step(p, {"w": 2 * p["w"]})
    assert np.all(np.abs(p["w"]) < 0.05)


def test_zero_learning_rate_keeps_initial_weights():
    X, y = _data()
    m = train_mlp(X[:30], y[:30], X[30:], y[30:], TrainConfig(max_epochs=3, learning_rate=0.0))
    init = init_parameters(3, 5, stream(0, "init"))
    for k in ("W1", "b1", "W2", "b2"):
        np.testing.assert_array_equal(getattr(m, k).ravel(), init[k].ravel())


def test_deterministic_per_seed():
    X, y = _data()
    cfg = TrainConfig(seed=5, max_epochs=20)
    a = train_mlp(X[:30], y[:30], X[30:], y[30:], cfg)
    b = train_mlp(X[:30], y[:30], X[30:], y[30:], cfg)
    np.testing.assert_array_equal(a.W1, b.W1)
    assert a.history == b.history
    c = train_mlp(X[:30], y[:30], X[30:], y[30:], TrainConfig(seed=6, max_epochs=20))
    assert not np.array_equal(a.W1, c.W1)


def test_best_epoch_snapshot():
    X, y = _data(2)
    m = train_mlp(X[:30], y[:30], X[30:], y[30:], TrainConfig(max_epochs=60, batch_size=8))
    vals = [h[2] for h in m.history]
    assert len(vals) == 60 and [h[0] for h in m.history] == list(range(1, 61))
    assert m.best_epoch == int(np.argmin(vals)) + 1
    e = m.predict(X[30:]) - y[30:]
    assert np.sqrt(e @ e / e.size) == pytest.approx(min(vals), abs=1e-12)


def test_learns_sum():
    X, y = _data(3, m=200)
    m = train_mlp(X[:160], y[:160], X[160:], y[160:],
                  TrainConfig(max_epochs=300, batch_size=16, learning_rate=0.01, dropout_rate=0.0))
    assert m.best_validation_rmse < 0.1


def test_small_learning_rate_lowers_training_loss():
    X, y = _data(4)
    m = train_mlp(X, y, X, y, TrainConfig(max_epochs=30, learning_rate=1e-4, dropout_rate=0.0))
    assert m.history[-1][1] < m.history[0][1]


@pytest.mark.filterwarnings("ignore:overflow")
def test_divergence_raises():
    X, y = _data()
    with pytest.raises(TrainingDivergedError) as ei:
        train_mlp(X * 1e200, y * 1e200, X[:5], y[:5], TrainConfig(max_epochs=5))
    assert ei.value.epoch >= 1


def test_empty_validation():
    X, y = _data()
    with pytest.raises(ValueError):
        train_mlp(X, y, X[:0], y[:0])


@pytest.mark.parametrize("kw", [{"max_epochs": 0}, {"batch_size": 0}, {"learning_rate": -1},
                                {"dropout_rate": 1.0}, {"beta1": 1.0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


def test_params_round_trip():
    X, y = _data()
    m = train_mlp(X[:30], y[:30], X[30:], y[30:], TrainConfig(max_epochs=5))
    again = MlpModel.from_params(m.params(), m.feature_names)
    np.testing.assert_array_equal(again.predict(X), m.predict(X))
    assert again.best_epoch == m.best_epoch
