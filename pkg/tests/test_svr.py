import math

import numpy as np
import pytest

import oracles
from polarml.errors import ConvergenceError
from polarml.models import fit_svr
from polarml.models.svr import SvrModel, dual_objective, rbf_gram, rbf_kernel


def kkt_violation(model, X, y, v_full):
    """Largest breach of the epsilon-SVR complementarity conditions."""
    r = y - model.predict(X)
    eps, C = model.epsilon_tube, model.c_penalty
    worst = 0.0
    for ri, vi in zip(r, v_full):
        if abs(vi) < 1e-9:
            worst = max(worst, abs(ri) - eps)
        elif abs(vi) > C - 1e-9:
            worst = max(worst, eps - abs(ri), 0.0 if np.sign(ri) == np.sign(vi) else abs(ri))
        else:
            worst = max(worst, abs(abs(ri) - eps), 0.0 if np.sign(ri) == np.sign(vi) else abs(ri))
    return worst


def full_coefficients(model, X):
    v = np.zeros(X.shape[0])
    for coef, sv in zip(model.support_coefficients, model.support_vectors):
        v[np.flatnonzero(np.all(X == sv, axis=1))[0]] = coef
    return v


class TestKernel:
    def test_identical_points(self):
        assert rbf_kernel([1.0, 2.0], [1.0, 2.0], 0.7) == 1.0

    def test_unit_distance(self):
        assert rbf_kernel([0.0], [1.0], 1.0) == pytest.approx(math.exp(-1.0), abs=1e-16)
        # sigma^2 = 2 gives gamma = 0.5
        assert rbf_kernel([0.0, 0.0], [1.0, 1.0], 0.5) == pytest.approx(math.exp(-1.0), abs=1e-16)

    def test_gram_matches_pointwise(self):
        rng = np.random.default_rng(2)
        A, B = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
        G = rbf_gram(A, B, 0.3)
        for i in range(5):
            for j in range(4):
                assert G[i, j] == pytest.approx(rbf_kernel(A[i], B[j], 0.3), abs=1e-14)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            rbf_kernel([0.0], [0.0, 1.0], 1.0)
        with pytest.raises(ValueError):
            rbf_kernel([0.0], [1.0], 0.0)


class TestFit:
    def test_constant_labels(self):
        X = np.linspace(0, 1, 8)[:, None]
        m = fit_svr(X, np.full(8, 0.42), c_penalty=10.0, epsilon_tube=0.1)
        assert m.support_coefficients.size == 0
        assert m.bias == pytest.approx(0.42, abs=1e-15)
        np.testing.assert_allclose(m.predict(X), 0.42)

    def test_tiny_instance_against_projected_gradient(self):
        X = np.array([[0.0], [0.2], [0.4], [0.6], [0.8], [1.0]])
        y = np.array([0.1, 0.5, 0.9, 0.7, 0.3, 0.2])
        m = fit_svr(X, y, c_penalty=1.0, epsilon_tube=0.05, gamma=2.0, tolerance=1e-10)
        K = rbf_gram(X, X, 2.0)
        v = full_coefficients(m, X)
        want = oracles.svr_dual_projected_gradient(K, y, 1.0, 0.05)
        assert dual_objective(v, K, y, 0.05) == pytest.approx(want, abs=1e-6)
        assert kkt_violation(m, X, y, v) < 1e-6

    def test_dual_feasibility(self):
        rng = np.random.default_rng(8)
        X = rng.uniform(size=(25, 3))
        y = np.sin(3 * X[:, 0]) + 0.1 * rng.normal(size=25)
        m = fit_svr(X, y, c_penalty=2.0, epsilon_tube=0.05, gamma=1.0, tolerance=1e-8)
        v = m.support_coefficients
        assert abs(v.sum()) < 1e-10
        assert np.all(np.abs(v) <= 2.0 + 1e-12)
        assert np.all(np.abs(v) >= 1e-12)

    def test_pruning_does_not_change_predictions(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(size=(20, 2))
        y = X[:, 0] ** 2 + X[:, 1]
        m = fit_svr(X, y, c_penalty=5.0, epsilon_tube=0.02, gamma=1.5, tolerance=1e-8)
        v = full_coefficients(m, X)
        dense = rbf_gram(X, X, 1.5) @ v + m.bias
        np.testing.assert_allclose(m.predict(X), dense, atol=1e-12)
        assert m.support_coefficients.size < 20 or np.all(v != 0)

    def test_wide_tube_gives_flat_model(self):
        X = np.linspace(0, 1, 10)[:, None]
        y = 1.0 + 0.01 * np.arange(10)
        m = fit_svr(X, y, epsilon_tube=1.0)
        assert m.support_coefficients.size == 0

    def test_default_gamma(self):
        m = fit_svr(np.eye(4), [1.0, 2.0, 3.0, 4.0])
        assert m.gamma == 0.25 and m.sigma_squared == 4.0

    def test_sweep_cap(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(size=(30, 2))
        with pytest.raises(ConvergenceError) as ei:
            fit_svr(X, rng.normal(size=30), c_penalty=100.0, epsilon_tube=0.0,
                    tolerance=1e-12, max_sweeps=1)
        assert ei.value.worst_violation > 0

    @pytest.mark.parametrize("kw", [{"c_penalty": 0}, {"gamma": -1}, {"epsilon_tube": -0.1},
                                    {"tolerance": 0}, {"max_passes": 0}])
    def test_invalid_hyperparameters(self, kw):
        with pytest.raises(ValueError):
            fit_svr(np.eye(3), [1.0, 2.0, 3.0], **kw)

    def test_params_round_trip(self):
        X = np.linspace(0, 1, 6)[:, None]
        m = fit_svr(X, np.sin(X.ravel() * 3), epsilon_tube=0.01)
        again = SvrModel.from_params(m.params(), m.feature_names)
        np.testing.assert_array_equal(again.predict(X), m.predict(X))
