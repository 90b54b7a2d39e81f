"""Exhaustive hyperparameter grid search scored by validation RMSE."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Callable, Mapping

import numpy as np

from ..errors import PolarmlError
from .mlp import TrainConfig, train_mlp
from .svr import fit_svr

FAMILIES = ("SVM", "ANN")


def expand_grid(grid: Mapping[str, list]) -> list:
    """Cartesian product of the grid values, in declared key order (last key fastest)."""
    if not grid:
        return [{}]
    keys = list(grid)
    values = [list(grid[k]) for k in keys]
    if any(len(v) == 0 for v in values):
        raise ValueError("every grid axis needs at least one value")
    return [dict(zip(keys, combo)) for combo in itertools.product(*values)]


def _rmse(y, yhat):
    d = np.asarray(yhat, dtype=float) - np.asarray(y, dtype=float)
    return float(np.sqrt(d @ d / d.size))


def _trainer(family: str, base: Mapping | None = None) -> Callable:
    base = dict(base or {})
    if family == "SVM":
        def run(cell, X, y, Xv, yv, names):
            return fit_svr(X, y, feature_names=names, **{**base, **cell})
    elif family == "ANN":
        cfg0 = base.pop("config", None) or TrainConfig(**base)

        def run(cell, X, y, Xv, yv, names):
            return train_mlp(X, y, Xv, yv, replace(cfg0, **cell), feature_names=names)
    else:
        raise ValueError(f"unknown model family {family!r}; expected one of {FAMILIES}")
    return run


@dataclass(frozen=True)
class GridResult:
    family: str
    best_params: dict
    best_model: object
    best_rmse: float
    table: tuple  # (params, rmse or nan, error message or None) per cell

    @property
    def failed(self) -> list:
        return [(p, err) for p, _, err in self.table if err is not None]

    def to_rows(self) -> list:
        return [{**p, "validation_rmse": r, "error": e} for p, r, e in self.table]


def grid_search(family: str, grid: Mapping[str, list], X_train, y_train, X_val, y_val,
                base: Mapping | None = None, feature_names=()) -> GridResult:
    """Train one model per grid cell and keep the lowest validation RMSE.

    Ties go to the earliest cell in grid order. A cell that raises is recorded
    with its error and the sweep continues; if every cell fails the first
    error is re-raised.
    """
    cells = expand_grid(grid)
    run = _trainer(family, base)
    rows = []
    best = None
    first_error = None
    for cell in cells:
        try:
            model = run(cell, X_train, y_train, X_val, y_val, feature_names)
            score = _rmse(y_val, model.predict(X_val))
            if not math.isfinite(score):
                raise PolarmlError("non-finite validation RMSE")
        except (PolarmlError, ValueError, FloatingPointError) as exc:
            first_error = first_error or exc
            rows.append((cell, math.nan, f"{type(exc).__name__}: {exc}"))
            continue
        rows.append((cell, score, None))
        if best is None or score < best[1]:
            best = (cell, score, model)
    if best is None:
        raise first_error
    return GridResult(family, best[0], best[2], best[1], tuple(rows))
