"""Generators for the bundled synthetic CSV fixtures.

``panel`` mimics the 2013-2016 state panel: 45 states x 4 years, 15 features,
with every feature's Pearson correlation against the House and Senate labels
set by construction. ``future`` is the matching unlabeled 2017 table for all
50 states. ``nonlinear`` is a 9-feature panel whose label is a smooth
non-linear function of the features plus noise.

Run ``python -m polarml.fixtures <dir>`` to regenerate the files.
"""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from .dataset import DatasetTable, RowKey, write_table
from .rng import stream
from .stats import pearson, spearman

STATES = (
    "Alabama", "Alaska", "Arizona", "Arkansas", "California", "Colorado", "Connecticut",
    "Delaware", "Florida", "Georgia", "Hawaii", "Idaho", "Illinois", "Indiana", "Iowa",
    "Kansas", "Kentucky", "Louisiana", "Maine", "Maryland", "Massachusetts", "Michigan",
    "Minnesota", "Mississippi", "Missouri", "Montana", "Nebraska", "Nevada", "New Hampshire",
    "New Jersey", "New Mexico", "New York", "North Carolina", "North Dakota", "Ohio",
    "Oklahoma", "Oregon", "Pennsylvania", "Rhode Island", "South Carolina", "South Dakota",
    "Tennessee", "Texas", "Utah", "Vermont", "Virginia", "Washington", "West Virginia",
    "Wisconsin", "Wyoming",
)
# Nebraska is unicameral and non-partisan; the other four stand in for incomplete records
PANEL_STATES = tuple(s for s in STATES
                     if s not in ("Nebraska", "Hawaii", "Louisiana", "North Dakota", "Vermont"))
PANEL_YEARS = (2013, 2014, 2015, 2016)
FUTURE_YEAR = 2017

# name, (r_house, r_senate), (typical level, spread); None level means anchored
PANEL_FEATURES = (
    ("internet_subscription_pct", (0.053, 0.105), (None, 5.0)),
    ("moved_from_abroad", (0.383, 0.463), (60000.0, 15000.0)),
    ("climate_belief_pct", (0.266, 0.352), (68.0, 4.0)),
    ("mass_shootings_per_million", (0.223, 0.243), (1.6, 0.4)),
    ("disability_pct", (-0.204, -0.244), (13.0, 2.0)),
    ("very_religious_pct", (-0.207, -0.2111), (40.0, 7.0)),
    ("bachelors_pct", (0.197, 0.226), (29.0, 4.5)),
    ("nonreligious_pct", (0.177, 0.194), (23.0, 5.0)),
    ("median_age", (0.042, -0.031), (None, 2.0)),
    ("median_household_income", (0.071, 0.163), (55000.0, 8000.0)),
    ("unemployment_rate", (-0.061, -0.048), (5.8, 1.2)),
    ("poverty_rate", (-0.083, -0.072), (14.5, 2.5)),
    ("foreign_born_pct", (0.064, 0.088), (9.5, 4.0)),
    ("veteran_pct", (-0.027, 0.019), (9.0, 1.5)),
    ("mean_commute_minutes", (0.035, 0.058), (24.0, 3.0)),
)
SELECTED = tuple(name for name, (rh, rs), _ in PANEL_FEATURES if max(abs(rh), abs(rs)) >= 0.1)
ANCHORS = {"internet_subscription_pct": 64.7, "median_age": 38.3}
ALABAMA_2013 = (0.73, 0.93)
# excluded features engineered to trip the rho - r >= 0.05 flag: house, senate
FLAG_TARGETS = {
    "median_age": (True, True),
    "unemployment_rate": (True, True),
    "poverty_rate": (True, False),
    "foreign_born_pct": (True, True),
    "veteran_pct": (True, True),
    "mean_commute_minutes": (False, False),
}
PRECISION = 6
LAMBDA = 0.05


def _panel_keys():
    return [RowKey(s, y) for y in PANEL_YEARS for s in PANEL_STATES]


def _unit(v):
    v = v - v.mean()
    return v / np.linalg.norm(v)


def _labels(rng, m):
    latent = rng.normal(size=m)
    h = np.exp(0.2 + 0.35 * latent + 0.2 * rng.normal(size=m))
    s = np.exp(0.3 + 0.35 * latent + 0.2 * rng.normal(size=m))
    h[0], s[0] = ALABAMA_2013
    return np.round(h, 2), np.round(s, 2)


def _with_correlations(noise, e_h, e_s, r_h, r_s):
    """Unit-variance vector whose Pearson correlations with h and s are exactly r_h, r_s.

    ``e_h`` and ``e_s`` are the centered unit label vectors; ``noise`` supplies
    the component orthogonal to both.
    """
    c = float(e_h @ e_s)
    e2 = _unit(e_s - c * e_h)
    a = r_h
    b = (r_s - r_h * c) / np.sqrt(1.0 - c * c)
    rest = 1.0 - a * a - b * b
    if rest <= 0:
        raise ValueError("requested correlations are infeasible")
    basis = np.column_stack([np.ones_like(e_h), e_h, e2])
    q, _ = np.linalg.qr(basis)
    resid = noise - q @ (q.T @ noise)
    return a * e_h + b * e2 + np.sqrt(rest) * _unit(resid)


def _flags(f, h, s):
    return (spearman(f, h) - pearson(f, h) >= LAMBDA, spearman(f, s) - pearson(f, s) >= LAMBDA)


def _noise(rng, m, outliers):
    z = rng.normal(size=m)
    if outliers:
        idx = rng.choice(m, size=outliers, replace=False)
        z[idx] += rng.choice([-1.0, 1.0], size=outliers) * rng.uniform(6, 12, size=outliers)
    return z


def make_panel(seed: int = 2013):
    """Return ``(labeled_panel, future_2017)`` tables."""
    rng = stream(seed, "fixture")
    keys = _panel_keys()
    m = len(keys)
    h, s = _labels(rng, m)
    e_h, e_s = _unit(h), _unit(s)
    cols = []
    for name, (r_h, r_s), (level, spread) in PANEL_FEATURES:
        want = FLAG_TARGETS.get(name, (False, False))
        for _ in range(5000):
            outliers = int(rng.integers(2, 8)) if any(want) else 0
            f = _with_correlations(_noise(rng, m, outliers), e_h, e_s, r_h, r_s)
            f = f * np.sqrt(m)
            if level is None:
                col = ANCHORS[name] + spread * (f - f[0])
            else:
                col = level + spread * f
            col = np.round(col, PRECISION)
            if np.any(col <= 0):
                continue
            if _flags(col, h, s) == want:
                break
        else:
            raise RuntimeError(f"could not realize flag pattern for {name}")
        cols.append(col)
    X = np.column_stack(cols)
    names = tuple(n for n, _, _ in PANEL_FEATURES)
    panel = DatasetTable(keys, X, names, h, s)

    # 2017: each panel state drifts from its 2016 row; the five others borrow a random state
    last = {k.state: X[i] for i, k in enumerate(keys) if k.year == PANEL_YEARS[-1]}
    spreads = np.array([sp for _, _, (_, sp) in PANEL_FEATURES])
    fut = []
    for state in STATES:
        base = last.get(state)
        if base is None:
            base = last[PANEL_STATES[int(rng.integers(len(PANEL_STATES)))]]
        row = np.abs(base + 0.1 * spreads * rng.normal(size=base.size))
        fut.append(np.round(row, PRECISION))
    future = DatasetTable([RowKey(st, FUTURE_YEAR) for st in STATES], np.array(fut), names)
    return panel, future


NONLINEAR_FEATURES = tuple(f"x{j + 1}" for j in range(9))


def nonlinear_target(U):
    """Smooth non-linear ground truth on features scaled to roughly [0, 1]."""
    U = np.asarray(U, dtype=float)
    return (1.0 + 4.0 * (U[:, 0] - 0.5) ** 2 + 1.2 * np.abs(U[:, 1] - 0.5)
            + 0.3 * U[:, 2] + 0.2 * U[:, 3] * U[:, 4])


def make_nonlinear(seed: int = 7, noise: float = 0.1):
    """Return ``(labeled_table, future_2017)`` with a known non-linear target."""
    rng = stream(seed, "fixture")
    keys = _panel_keys()
    m = len(keys)
    U = rng.uniform(0.0, 1.0, size=(m, 9))
    y = nonlinear_target(U) + noise * rng.normal(size=m)
    y = np.maximum(y, 0.05)
    s = np.maximum(0.8 * y + 0.3 + 0.5 * noise * rng.normal(size=m), 0.05)
    lo = np.array([10.0 * (j + 1) for j in range(9)])
    span = np.array([5.0 + 3.0 * j for j in range(9)])
    X = np.round(lo + span * U, PRECISION)
    table = DatasetTable(keys, X, NONLINEAR_FEATURES, np.round(y, PRECISION),
                         np.round(s, PRECISION))
    Uf = rng.uniform(0.0, 1.0, size=(len(STATES), 9))
    future = DatasetTable([RowKey(st, FUTURE_YEAR) for st in STATES],
                          np.round(lo + span * Uf, PRECISION), NONLINEAR_FEATURES)
    return table, future


FILES = {
    "panel": "polarization_panel.csv",
    "future": "polarization_2017.csv",
    "nonlinear": "synthetic_nonlinear.csv",
    "nonlinear_future": "synthetic_nonlinear_2017.csv",
}


def data_path(name: str) -> Path:
    return Path(__file__).with_name("data") / FILES[name]


def write_all(directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    panel, future = make_panel()
    nl, nl_future = make_nonlinear()
    write_table(panel, d / FILES["panel"], PRECISION)
    write_table(future, d / FILES["future"], PRECISION)
    write_table(nl, d / FILES["nonlinear"], PRECISION)
    write_table(nl_future, d / FILES["nonlinear_future"], PRECISION)


if __name__ == "__main__":
    write_all(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).with_name("data"))
