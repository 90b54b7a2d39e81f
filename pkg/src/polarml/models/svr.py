"""Epsilon-insensitive support vector regression with an RBF kernel.

The dual is solved by sequential minimal optimization over the doubled
variable vector ``a = (alpha, alpha*)`` of length ``2l``::

    min  1/2 a^T Q a + p^T a
    s.t. 0 <= a_t <= C,  sum_t s_t a_t = 0

with ``s = (+1..., -1...)``, ``Q_st = s_s s_t K(x_s, x_t)`` and
``p = (eps - y, eps + y)``. The regression coefficients are
``v = alpha - alpha*`` and ``f(x) = sum_i v_i K(x, x_i) + b``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError

TAU = 1e-12
PRUNE = 1e-12


def rbf_kernel(x, x2, gamma: float) -> float:
    x = np.asarray(x, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x.size != x2.size:
        raise ValueError(f"length mismatch: {x.size} vs {x2.size}")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    d = x - x2
    return float(np.exp(-gamma * float(d @ d)))


def rbf_gram(A, B, gamma: float) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True)
class SvrModel:
    support_coefficients: np.ndarray
    support_vectors: np.ndarray
    bias: float
    gamma: float
    c_penalty: float
    epsilon_tube: float
    feature_names: tuple = ()
    n_sweeps: int = 0

    family = "SVM"

    def __post_init__(self):
        v = np.array(self.support_coefficients, dtype=float).ravel()
        sv = np.array(self.support_vectors, dtype=float)
        n = len(self.feature_names) if self.feature_names else (sv.shape[1] if sv.ndim == 2 else 0)
        sv = sv.reshape(v.size, n)
        v.setflags(write=False)
        sv.setflags(write=False)
        object.__setattr__(self, "support_coefficients", v)
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    @property
    def sigma_squared(self) -> float:
        return 1.0 / self.gamma

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        if self.support_coefficients.size == 0:
            return np.full(X.shape[0], self.bias)
        return rbf_gram(X, self.support_vectors, self.gamma) @ self.support_coefficients + self.bias

    def params(self) -> dict:
        return {"support_coefficients": self.support_coefficients.tolist(),
                "support_vectors": self.support_vectors.tolist(),
                "bias": self.bias, "gamma": self.gamma, "c_penalty": self.c_penalty,
                "epsilon_tube": self.epsilon_tube, "n_sweeps": self.n_sweeps}

    @classmethod
    def from_params(cls, p, feature_names=()):
        return cls(p["support_coefficients"], p["support_vectors"], p["bias"], p["gamma"],
                   p["c_penalty"], p["epsilon_tube"], feature_names, p.get("n_sweeps", 0))


def dual_objective(v, K, y, epsilon_tube) -> float:
    """Dual value ``-1/2 v^T K v + y^T v - eps |v|_1`` (to be maximized)."""
    v = np.asarray(v, dtype=float)
    return float(-0.5 * v @ K @ v + y @ v - epsilon_tube * np.abs(v).sum())


def _bounds(a, s, C):
    up = np.where(s > 0, a < C, a > 0)
    low = np.where(s > 0, a > 0, a < C)
    return up, low


def _pair_update(i, j, a, G, s, Q_ii, Q_jj, Q_ij, C):
    """Analytic optimum of the two-variable subproblem, clipped to the box."""
    ai, aj = a[i], a[j]
    if s[i] != s[j]:
        quad = max(Q_ii + Q_jj + 2.0 * Q_ij, TAU)
        delta = (-G[i] - G[j]) / quad
        diff = ai - aj
        ai += delta
        aj += delta
        if diff > 0:
            if aj < 0:
                aj, ai = 0.0, diff
        elif ai < 0:
            ai, aj = 0.0, -diff
        if diff > 0:
            if ai > C:
                ai, aj = C, C - diff
        elif aj > C:
            aj, ai = C, C + diff
    else:
        quad = max(Q_ii + Q_jj - 2.0 * Q_ij, TAU)
        delta = (G[i] - G[j]) / quad
        total = ai + aj
        ai -= delta
        aj += delta
        if total > C:
            if ai > C:
                ai, aj = C, total - C
        elif aj < 0:
            aj, ai = 0.0, total
        if total > C:
            if aj > C:
                aj, ai = C, total - C
        elif ai < 0:
            ai, aj = 0.0, total
    return ai, aj


def _solve_dual(K, y, C, eps, tol, max_passes, max_sweeps):
    l = y.size
    n2 = 2 * l
    s = np.r_[np.ones(l), -np.ones(l)]
    idx = np.r_[np.arange(l), np.arange(l)]
    a = np.zeros(n2)
    G = np.r_[eps - y, eps + y]
    Kd = np.diag(K)[idx]

    def qcol(t):
        return s * s[t] * K[idx, idx[t]]

    up, low = _bounds(a, s, C)
    score = -s * G
    clean = 0
    sweep = 0
    worst = np.inf
    while sweep < max_sweeps:
        sweep += 1
        changed = 0
        low_min = score[low].min() if low.any() else np.inf
        for i in range(n2):
            if not up[i]:
                continue
            gi = score[i]
            if gi - low_min <= tol:
                continue
            # second-order choice of the partner among violating low-set indices
            jj = np.flatnonzero(low & (score < gi))
            Qi = qcol(i)
            b_ij = gi - score[jj]
            a_ij = Kd[i] + Kd[jj] - 2.0 * s[i] * s[jj] * Qi[jj]
            a_ij = np.where(a_ij > 0, a_ij, TAU)
            j = int(jj[np.argmax(b_ij * b_ij / a_ij)])
            ai_old, aj_old = a[i], a[j]
            ai, aj = _pair_update(i, j, a, G, s, Kd[i], Kd[j], Qi[j], C)
            dai, daj = ai - ai_old, aj - aj_old
            if dai == 0.0 and daj == 0.0:
                continue
            a[i], a[j] = ai, aj
            G += Qi * dai + qcol(j) * daj
            score = -s * G
            for t in (i, j):
                up[t] = a[t] < C if s[t] > 0 else a[t] > 0
                low[t] = a[t] > 0 if s[t] > 0 else a[t] < C
            low_min = score[low].min() if low.any() else np.inf
            changed += 1
        worst = (score[up].max() if up.any() else -np.inf) - (score[low].min() if low.any() else np.inf)
        if changed == 0 or worst <= tol:
            clean += 1
            if clean >= max_passes:
                return a, G, sweep
        else:
            clean = 0
    raise ConvergenceError(
        f"SMO did not converge within {max_sweeps} sweeps; worst KKT violation {worst:.3g}",
        worst_violation=float(worst))


def _bias(a, G, s, C):
    score = -s * G
    free = (a > 0) & (a < C)
    if free.any():
        return float(score[free].mean())
    up, low = _bounds(a, s, C)
    hi = score[up].max() if up.any() else None
    lo = score[low].min() if low.any() else None
    if hi is None:
        return float(lo)
    if lo is None:
        return float(hi)
    return float((hi + lo) / 2.0)


def fit_svr(X, y, c_penalty: float = 1.0, epsilon_tube: float = 0.1, gamma: float | None = None,
            tolerance: float = 1e-3, max_passes: int = 1, max_sweeps: int = 10_000,
            feature_names=()) -> SvrModel:
    """Fit an RBF support vector regressor by SMO.

    ``gamma`` defaults to ``1 / n_features``; it relates to a kernel width
    ``sigma`` by ``gamma = 1 / sigma**2``. Sweeps over the upper-set indices run
    until ``max_passes`` consecutive sweeps leave no pair violating the KKT
    conditions by more than ``tolerance``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("X must be 2-D with one row per label")
    if X.shape[0] < 2:
        raise ValueError("need at least two training rows")
    if gamma is None:
        gamma = 1.0 / X.shape[1]
    if c_penalty <= 0 or gamma <= 0 or epsilon_tube < 0 or tolerance <= 0:
        raise ValueError("c_penalty, gamma and tolerance must be positive, epsilon_tube >= 0")
    if max_passes < 1:
        raise ValueError("max_passes must be at least 1")
    K = rbf_gram(X, X, gamma)
    a, G, sweeps = _solve_dual(K, y, float(c_penalty), float(epsilon_tube), float(tolerance),
                               int(max_passes), int(max_sweeps))
    l = y.size
    s = np.r_[np.ones(l), -np.ones(l)]
    b = _bias(a, G, s, c_penalty)
    v = a[:l] - a[l:]
    keep = np.abs(v) >= PRUNE
    return SvrModel(v[keep], X[keep], b, float(gamma), float(c_penalty), float(epsilon_tube),
                    tuple(feature_names) or tuple(f"x{j}" for j in range(X.shape[1])), sweeps)
