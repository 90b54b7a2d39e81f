"""One-hidden-layer ReLU regression network trained with Adam.

Layout: ``input -> dense(hidden) -> ReLU -> dropout -> dense(1)``. The loss is
mean squared error; dropout is inverted so inference uses the weights as is.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import TrainingDivergedError
from ..rng import stream

PARAM_NAMES = ("W1", "b1", "W2", "b2")


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    max_epochs: int = 500
    batch_size: int = 32
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-7
    hidden_units: int = 5
    dropout_rate: float = 0.2

    def __post_init__(self):
        if self.max_epochs < 1 or self.batch_size < 1 or self.hidden_units < 1:
            raise ValueError("max_epochs, batch_size and hidden_units must be >= 1")
        if self.learning_rate < 0 or self.adam_epsilon <= 0:
            raise ValueError("learning_rate must be >= 0 and adam_epsilon > 0")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MlpModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    dropout_rate: float = 0.2
    best_epoch: int = 0
    history: tuple = ()
    feature_names: tuple = ()
    config: TrainConfig | None = field(default=None, compare=False)

    family = "ANN"

    def __post_init__(self):
        for name in PARAM_NAMES:
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "W2", self.W2.reshape(-1, 1))
        object.__setattr__(self, "b2", self.b2.reshape(1))
        object.__setattr__(self, "history", tuple(tuple(h) for h in self.history))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.W1.shape[1] != self.b1.size or self.W2.shape[0] != self.b1.size:
            raise ValueError("inconsistent layer shapes")

    @property
    def n_features(self) -> int:
        return self.W1.shape[0]

    @property
    def parameters(self) -> dict:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        return forward(self.parameters, X)

    @property
    def best_validation_rmse(self) -> float:
        return self.history[self.best_epoch - 1][2]

    def params(self) -> dict:
        out = {k: getattr(self, k).tolist() for k in PARAM_NAMES}
        out.update(dropout_rate=self.dropout_rate, best_epoch=self.best_epoch)
        return out

    @classmethod
    def from_params(cls, p, feature_names=(), history=(), config=None):
        return cls(p["W1"], p["b1"], p["W2"], p["b2"], p["dropout_rate"], p["best_epoch"],
                   history, feature_names, config)


def init_parameters(n_in: int, n_hidden: int, rng: np.random.Generator) -> dict:
    """Glorot-uniform weights, zero biases."""
    lim1 = np.sqrt(6.0 / (n_in + n_hidden))
    lim2 = np.sqrt(6.0 / (n_hidden + 1))
    return {"W1": rng.uniform(-lim1, lim1, size=(n_in, n_hidden)),
            "b1": np.zeros(n_hidden),
            "W2": rng.uniform(-lim2, lim2, size=(n_hidden, 1)),
            "b2": np.zeros(1)}


def forward(params, X, mask=None) -> np.ndarray:
    """Network output; ``mask`` is the already rescaled dropout multiplier."""
    H = np.maximum(X @ params["W1"] + params["b1"], 0.0)
    if mask is not None:
        H = H * mask
    return (H @ params["W2"] + params["b2"]).ravel()


def loss_and_gradients(params, X, y, mask=None):
    """Mean squared error over the batch and its gradient for every parameter."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    Z = X @ params["W1"] + params["b1"]
    A = np.maximum(Z, 0.0)
    H = A if mask is None else A * mask
    out = (H @ params["W2"] + params["b2"]).ravel()
    err = out - y
    loss = float(err @ err) / n
    d_out = (2.0 / n) * err[:, None]
    gW2 = H.T @ d_out
    gb2 = d_out.sum(axis=0)
    dH = d_out @ params["W2"].T
    dA = dH if mask is None else dH * mask
    dZ = dA * (Z > 0)
    gW1 = X.T @ dZ
    gb1 = dZ.sum(axis=0)
    return loss, {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2}


class Adam:
    """Adam with the bias correction folded into the step size."""

    def __init__(self, params, learning_rate=0.001, beta1=0.9, beta2=0.999, epsilon=1e-7):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        self.t += 1
        lr_t = self.lr * np.sqrt(1.0 - self.beta2 ** self.t) / (1.0 - self.beta1 ** self.t)
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] = params[k] - lr_t * self.m[k] / (np.sqrt(self.v[k]) + self.epsilon)
        return params


def _rmse(params, X, y):
    e = forward(params, X) - y
    return float(np.sqrt(e @ e / y.size))


def train_mlp(X_train, y_train, X_val, y_val, config: TrainConfig = TrainConfig(),
              feature_names=()) -> MlpModel:
    """Mini-batch Adam on MSE, keeping the parameters of the best validation epoch.

    Initialization, batch order and dropout masks each draw from their own
    random stream derived from ``config.seed``.
    """
    X_train = np.asarray(X_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float).ravel()
    X_val = np.asarray(X_val, dtype=float)
    y_val = np.asarray(y_val, dtype=float).ravel()
    if X_val.shape[0] == 0 or y_val.size == 0:
        raise ValueError("validation set is empty")
    if X_train.shape[0] == 0:
        raise ValueError("training set is empty")
    if X_train.shape[1] != X_val.shape[1]:
        raise ValueError("train and validation feature counts differ")

    params = init_parameters(X_train.shape[1], config.hidden_units, stream(config.seed, "init"))
    batch_rng = stream(config.seed, "batch")
    drop_rng = stream(config.seed, "dropout")
    opt = Adam(params, config.learning_rate, config.beta1, config.beta2, config.adam_epsilon)
    keep = 1.0 - config.dropout_rate
    m = y_train.size

    history = []
    best = (np.inf, 0, {k: v.copy() for k, v in params.items()})
    for epoch in range(1, config.max_epochs + 1):
        order = batch_rng.permutation(m)
        for start in range(0, m, config.batch_size):
            rows = order[start:start + config.batch_size]
            mask = None
            if config.dropout_rate > 0:
                mask = (drop_rng.random((rows.size, config.hidden_units)) < keep) / keep
            loss, grads = loss_and_gradients(params, X_train[rows], y_train[rows], mask)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}", epoch)
            params = opt.step(params, grads)
        tr = _rmse(params, X_train, y_train)
        va = _rmse(params, X_val, y_val)
        if not (np.isfinite(tr) and np.isfinite(va)):
            raise TrainingDivergedError(f"non-finite RMSE at epoch {epoch}", epoch)
        history.append((epoch, tr, va))
        if va < best[0]:
            best = (va, epoch, {k: v.copy() for k, v in params.items()})

    _, best_epoch, snap = best
    return MlpModel(snap["W1"], snap["b1"], snap["W2"], snap["b2"], config.dropout_rate,
                    best_epoch, history,
                    tuple(feature_names) or tuple(f"x{j}" for j in range(X_train.shape[1])),
                    config)
