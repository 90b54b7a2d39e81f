"""Ordinary least squares through a column-pivoted QR factorization."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg
from scipy import special

from ..errors import SingularMatrixError


@dataclass(frozen=True)
class OlsModel:
    coefficients: np.ndarray
    intercept_included: bool
    feature_names: tuple = ()

    family = "OLS"

    def __post_init__(self):
        coef = np.array(self.coefficients, dtype=float)
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_features(self) -> int:
        return self.coefficients.size - int(self.intercept_included)

    @property
    def weights(self) -> np.ndarray:
        return self.coefficients[:self.n_features]

    @property
    def intercept(self) -> float:
        return float(self.coefficients[-1]) if self.intercept_included else 0.0

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        return X @ self.weights + self.intercept

    def params(self) -> dict:
        return {"coefficients": self.coefficients.tolist(),
                "intercept_included": self.intercept_included}

    @classmethod
    def from_params(cls, params, feature_names=()):
        return cls(params["coefficients"], params["intercept_included"], feature_names)


def _design(X, intercept):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.column_stack([X, np.ones(X.shape[0])]) if intercept else X


def _qr_solve(A, y, names):
    """Least-squares solution plus the triangular factor (in pivoted order)."""
    m, k = A.shape
    if m < k:
        raise SingularMatrixError(f"{m} rows cannot determine {k} coefficients")
    Q, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = diag[0] * max(m, k) * np.finfo(float).eps if k else 0.0
    rank = int(np.sum(diag > tol))
    if rank < k:
        dependent = [names[i] for i in piv[rank:]]
        raise SingularMatrixError(
            f"design matrix has rank {rank} < {k}; linearly dependent column(s): "
            + ", ".join(map(str, dependent)), dependent)
    beta_p = scipy.linalg.solve_triangular(R, Q.T @ y)
    beta = np.empty(k)
    beta[piv] = beta_p
    return beta, R, piv


def fit_ols(X, y, intercept: bool = True, feature_names=()) -> OlsModel:
    """Minimize the residual sum of squares. The intercept, if any, is stored last."""
    A = _design(X, intercept)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != A.shape[0]:
        raise ValueError("X and y have different row counts")
    names = list(feature_names) or [f"x{j}" for j in range(A.shape[1] - int(intercept))]
    if intercept:
        names = names + ["intercept"]
    beta, _, _ = _qr_solve(A, y, names)
    return OlsModel(beta, intercept, tuple(feature_names))


def student_t_sf(t: float, df: float) -> float:
    """Upper tail P(T > t) via the regularized incomplete beta function."""
    x = df / (df + t * t)
    tail = 0.5 * special.betainc(df / 2.0, 0.5, x)
    return float(tail if t >= 0 else 1.0 - tail)


class CoefficientTest(NamedTuple):
    feature_name: str
    coefficient: float
    std_error: float
    t: float
    p: float


class CoefficientTable(NamedTuple):
    rows: list
    df: int
    rss: float
    degenerate: bool


def ols_coefficient_pvalues(X, y, feature_names=(), intercept: bool = False) -> CoefficientTable:
    """Per-coefficient two-sided t-tests.

    The default fits without an intercept so only the features themselves are
    scored. A perfect fit (zero residual variance) yields ``degenerate=True``
    with NaN statistics.
    """
    A = _design(X, intercept)
    y = np.asarray(y, dtype=float).ravel()
    m, k = A.shape
    if m <= k:
        raise ValueError(f"need more rows than coefficients ({m} <= {k})")
    names = list(feature_names) or [f"x{j}" for j in range(k - int(intercept))]
    if intercept:
        names = names + ["intercept"]
    beta, R, piv = _qr_solve(A, y, names)
    resid = y - A @ beta
    rss = float(resid @ resid)
    df = m - k
    scale = np.sqrt((y @ y) / m) if m else 0.0
    degenerate = rss <= (1e-14 * max(scale, 1e-300)) ** 2 * m
    Rinv = scipy.linalg.solve_triangular(R, np.eye(k))
    cov_diag_p = np.sum(Rinv * Rinv, axis=1)
    cov_diag = np.empty(k)
    cov_diag[piv] = cov_diag_p
    rows = []
    sigma2 = rss / df
    for j in range(k):
        if degenerate:
            rows.append(CoefficientTest(names[j], float(beta[j]), 0.0, float("nan"), float("nan")))
            continue
        se = float(np.sqrt(sigma2 * cov_diag[j]))
        t = float(beta[j] / se)
        p = min(1.0, 2.0 * student_t_sf(abs(t), df))
        rows.append(CoefficientTest(names[j], float(beta[j]), se, t, p))
    return CoefficientTable(rows, df, rss, bool(degenerate))
