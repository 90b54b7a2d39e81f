"""Correlation measures, non-linearity flagging, feature selection and the
Wilcoxon signed-rank test."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import CorrelationError, DegenerateTestError

DEFAULT_LAMBDA = 0.05
DEFAULT_THRESHOLD = 0.1


def _pair(x, y):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise CorrelationError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise CorrelationError("need at least two observations")
    return x, y


def pearson(x, y) -> float:
    """Product-moment correlation coefficient."""
    x, y = _pair(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise CorrelationError("correlation undefined for a constant vector")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def rank_average_ties(x) -> np.ndarray:
    """Ranks 1..n, ties sharing the mean of the ranks they occupy."""
    x = np.asarray(x, dtype=float).ravel()
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    # boundaries of runs of equal values in sorted order
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], xs.size]
    avg = (starts + ends + 1) / 2.0
    ranks = np.empty(x.size)
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def spearman(x, y) -> float:
    """Spearman's rho as the Pearson coefficient of average-tie ranks."""
    x, y = _pair(x, y)
    return pearson(rank_average_ties(x), rank_average_ties(y))


def spearman_squared_rank_difference(x, y) -> float:
    """Closed form ``1 - 6 sum(d^2) / (n (n^2 - 1))``. Exact only without ties."""
    x, y = _pair(x, y)
    n = x.size
    d = rank_average_ties(x) - rank_average_ties(y)
    return 1.0 - 6.0 * float(d @ d) / (n * (n * n - 1))


class FlagEntry(NamedTuple):
    feature_name: str
    r: float
    rho: float
    gap: float
    flagged: bool


@dataclass(frozen=True)
class FlagReport:
    label_name: str
    lam: float
    entries: tuple

    @property
    def flagged(self) -> list:
        return [e.feature_name for e in self.entries if e.flagged]

    def to_dict(self) -> dict:
        return {"label": self.label_name, "lambda": self.lam,
                "entries": [e._asdict() for e in self.entries]}

    def to_rows(self) -> list:
        return [[self.label_name, e.feature_name, e.r, e.rho, e.gap, int(e.flagged)]
                for e in self.entries]


def flag_nonlinear(X, y, feature_names: Sequence[str], lam: float = DEFAULT_LAMBDA,
                   label_name: str = "y") -> FlagReport:
    """Flag every feature whose Spearman rho exceeds its Pearson r by at least ``lam``.

    A large positive gap hints at a monotone but non-linear relation or at
    outliers dragging the linear coefficient down.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(feature_names):
        raise ValueError("column count does not match feature_names")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    entries = []
    for j, name in enumerate(feature_names):
        try:
            r = pearson(X[:, j], y)
            rho = spearman(X[:, j], y)
        except CorrelationError as exc:
            raise CorrelationError(f"feature {name!r}: {exc}") from exc
        gap = rho - r
        entries.append(FlagEntry(name, r, rho, gap, gap >= lam))
    return FlagReport(label_name, float(lam), tuple(entries))


class CorrelationPair(NamedTuple):
    feature_name: str
    r_house: float
    r_senate: float


def correlation_pairs(table) -> list:
    """Pearson (r_house, r_senate) for every feature of a labeled table."""
    h, s = table.label("house"), table.label("senate")
    out = []
    for j, name in enumerate(table.feature_names):
        try:
            out.append(CorrelationPair(name, pearson(table.features[:, j], h),
                                       pearson(table.features[:, j], s)))
        except CorrelationError as exc:
            raise CorrelationError(f"feature {name!r}: {exc}") from exc
    return out


def select_features(pairs: Sequence[CorrelationPair], threshold: float = DEFAULT_THRESHOLD) -> list:
    """Keep features with ``max(|r_house|, |r_senate|) >= threshold``.

    The same list serves both tasks. Output is ordered by decreasing strength.
    """
    if not pairs:
        raise ValueError("no correlation pairs given")
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    kept = [p for p in pairs if max(abs(p.r_house), abs(p.r_senate)) >= threshold]
    kept.sort(key=lambda p: -max(abs(p.r_house), abs(p.r_senate)))
    return [p.feature_name for p in kept]


def correlation_matrix(table, label: str, features: Sequence[str] | None = None):
    """Pairwise Pearson matrix over ``features`` plus the chosen label column.

    Returns ``(matrix, names)`` where the label is the last entry of ``names``.
    """
    if features is not None:
        table = table.select(features)
    if table.m < 2:
        raise ValueError("need at least two rows")
    names = list(table.feature_names) + [f"{label}_polarization"]
    cols = np.column_stack([table.features, table.label(label)])
    k = cols.shape[1]
    mat = np.eye(k)
    for a in range(k):
        for b in range(a + 1, k):
            try:
                mat[a, b] = mat[b, a] = pearson(cols[:, a], cols[:, b])
            except CorrelationError as exc:
                bad = names[a] if np.ptp(cols[:, a]) == 0 else names[b]
                raise CorrelationError(f"column {bad!r} is constant") from exc
    return mat, names


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


@dataclass(frozen=True)
class WilcoxonResult:
    w_statistic: float
    n_effective: int
    z_score: float
    p_two_tailed: float
    w_plus: float = field(default=math.nan, compare=False)
    w_minus: float = field(default=math.nan, compare=False)

    @property
    def small_sample(self) -> bool:
        """Normal approximation is unreliable below five non-zero differences."""
        return self.n_effective < 5

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p_two_tailed < alpha

    def to_dict(self) -> dict:
        return {"W": self.w_statistic, "n_eff": self.n_effective, "z": self.z_score,
                "p": self.p_two_tailed, "small_sample": self.small_sample}


def p_from_w(w: float, n_eff: int) -> tuple:
    """Normal-approximation ``(z, two-tailed p)`` for a signed-rank statistic.

    No continuity or tie correction is applied.
    """
    n_eff = int(n_eff)
    if n_eff < 1:
        raise ValueError("n_eff must be at least 1")
    total = n_eff * (n_eff + 1) / 2.0
    if not 0.0 <= w <= total:
        raise ValueError(f"W={w} outside [0, {total}] for n_eff={n_eff}")
    mu = total / 2.0
    sigma = math.sqrt(n_eff * (n_eff + 1) * (2 * n_eff + 1) / 24.0)
    z = (w - mu) / sigma
    p = min(1.0, 2.0 * normal_cdf(-abs(z)))
    return z, p


def wilcoxon_signed_rank(a, b) -> WilcoxonResult:
    """Two-tailed paired signed-rank test, zero differences dropped."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty input")
    d = a - b
    d = d[d != 0]
    if d.size == 0:
        raise DegenerateTestError("all paired differences are zero")
    ranks = rank_average_ties(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    z, p = p_from_w(w, d.size)
    return WilcoxonResult(w, int(d.size), z, p, w_plus, w_minus)
