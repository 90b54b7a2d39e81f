"""Independent reference computations in extended precision.

Nothing here imports from polarml, so the checks stay independent of the
code under test.
"""
import mpmath as mp
import numpy as np

mp.mp.dps = 50


def pearson(x, y):
    x = [mp.mpf(float(v)) for v in x]
    y = [mp.mpf(float(v)) for v in y]
    n = len(x)
    mx = mp.fsum(x) / n
    my = mp.fsum(y) / n
    sxy = mp.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = mp.fsum((a - mx) ** 2 for a in x)
    syy = mp.fsum((b - my) ** 2 for b in y)
    return sxy / (mp.sqrt(sxx) * mp.sqrt(syy))


def ranks(x):
    """Average-tie ranks by counting: rank_i = #{x_j < x_i} + (#{x_j == x_i} + 1) / 2."""
    x = list(map(float, x))
    return [sum(v < xi for v in x) + (sum(v == xi for v in x) + 1) / 2 for xi in x]


def spearman(x, y):
    return pearson(ranks(x), ranks(y))


def spearman_closed_form(x, y):
    rx, ry = ranks(x), ranks(y)
    n = len(rx)
    d2 = sum((a - b) ** 2 for a, b in zip(rx, ry))
    return 1 - mp.mpf(6) * d2 / (n * (n * n - 1))


def normal_cdf(z):
    return mp.ncdf(mp.mpf(z))


def t_sf(t, df):
    """Upper tail of Student's t by quadrature of the density."""
    df = mp.mpf(df)
    c = mp.gamma((df + 1) / 2) / (mp.sqrt(df * mp.pi) * mp.gamma(df / 2))
    dens = lambda u: c * (1 + u * u / df) ** (-(df + 1) / 2)
    return mp.quad(dens, [mp.mpf(t), mp.inf])


def normal_equations(X, y):
    """Least squares through (X^T X) beta = X^T y in 50-digit arithmetic."""
    A = mp.matrix([[mp.mpf(float(v)) for v in row] for row in np.atleast_2d(X)])
    b = mp.matrix([mp.mpf(float(v)) for v in y])
    At = A.T
    beta = mp.lu_solve(At * A, At * b)
    return [beta[i] for i in range(A.cols)]


def ols_t_tests(X, y):
    """(beta, se, t, two-sided p) per column, no intercept."""
    A = mp.matrix([[mp.mpf(float(v)) for v in row] for row in np.atleast_2d(X)])
    b = mp.matrix([mp.mpf(float(v)) for v in y])
    m, k = A.rows, A.cols
    XtX_inv = mp.inverse(A.T * A)
    beta = XtX_inv * (A.T * b)
    r = b - A * beta
    s2 = mp.fsum(r[i] ** 2 for i in range(m)) / (m - k)
    out = []
    for j in range(k):
        se = mp.sqrt(s2 * XtX_inv[j, j])
        t = beta[j] / se
        out.append((beta[j], se, t, 2 * t_sf(abs(t), m - k)))
    return out


def svr_dual_cvxopt(K, y, C, eps):
    """Optimal dual value of epsilon-SVR via an interior-point QP solver."""
    from cvxopt import matrix, solvers

    solvers.options.update(show_progress=False, abstol=1e-12, reltol=1e-12, feastol=1e-12,
                           maxiters=200)
    l = len(y)
    Q = np.block([[K, -K], [-K, K]]) + 1e-13 * np.eye(2 * l)
    p = np.r_[eps - y, eps + y]
    G = np.vstack([-np.eye(2 * l), np.eye(2 * l)])
    h = np.r_[np.zeros(2 * l), C * np.ones(2 * l)]
    A = np.r_[np.ones(l), -np.ones(l)][None, :]
    sol = solvers.qp(matrix(Q), matrix(p), matrix(G), matrix(h), matrix(A), matrix(0.0))
    a = np.array(sol["x"]).ravel()
    v = a[:l] - a[l:]
    return float(-0.5 * v @ K @ v + y @ v - eps * np.abs(v).sum()), v


def _project(u, C, l):
    """Euclidean projection onto {0 <= a <= C, sum(a[:l]) = sum(a[l:])} by bisection."""
    sgn = np.r_[np.ones(l), -np.ones(l)]
    lo, hi = -(np.abs(u).max() + C), np.abs(u).max() + C
    for _ in range(64):
        mu = 0.5 * (lo + hi)
        if sgn @ np.clip(u - mu * sgn, 0, C) > 0:
            lo = mu
        else:
            hi = mu
    return np.clip(u - 0.5 * (lo + hi) * sgn, 0, C)


def svr_dual_projected_gradient(K, y, C, eps, iters=3000):
    """Accelerated projected gradient on the 2l-variable dual; returns the dual value."""
    l = len(y)
    Q = np.block([[K, -K], [-K, K]])
    p = np.r_[eps - y, eps + y]
    L = np.linalg.eigvalsh(Q).max()
    a = np.zeros(2 * l)
    z = a.copy()
    t = 1.0
    for _ in range(iters):
        a_new = _project(z - (Q @ z + p) / L, C, l)
        t_new = (1 + np.sqrt(1 + 4 * t * t)) / 2
        z = a_new + (t - 1) / t_new * (a_new - a)
        a, t = a_new, t_new
    v = a[:l] - a[l:]
    return float(-0.5 * v @ K @ v + y @ v - eps * np.abs(v).sum())
