"""End-to-end training for one regression task: split, scale, fit, score, compare."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import DatasetTable, apply_minmax, fit_minmax, split_train_validation
from .errors import PolarmlError
from .evaluation import EvalReport, compare_models
from .models import (MODEL_ORDER, TrainConfig, fit_ols, fit_svr, grid_search,
                     ols_coefficient_pvalues, train_mlp)

log = logging.getLogger(__name__)

GRID_ALIASES = {"svm": "SVM", "svr": "SVM", "ann": "ANN", "mlp": "ANN"}


def load_grid(path) -> dict:
    """Read a JSON grid file ``{"SVM": {param: [values]}, "ANN": {...}}``."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    out = {}
    for key, axes in doc.items():
        fam = GRID_ALIASES.get(key.lower(), key)
        if fam not in ("SVM", "ANN"):
            raise ValueError(f"grid file: unknown model family {key!r}")
        out[fam] = {k: list(v) if isinstance(v, (list, tuple)) else [v] for k, v in axes.items()}
    return out


def default_grid_path() -> Path:
    return Path(__file__).with_name("data") / "default_grid.json"


@dataclass
class TaskResult:
    task: str
    features: tuple
    split: object
    scaler: object
    models: dict = field(default_factory=dict)
    hyperparameters: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    report: EvalReport | None = None
    comparisons: list = field(default_factory=list)
    ols_pvalues: object = None


def run_task(table: DatasetTable, task: str, features, seed: int = 0,
             train_fraction: float = 0.8, grid: dict | None = None,
             svr_params: dict | None = None, ann_config: TrainConfig | None = None,
             alpha: float = 0.05, wilcoxon_mode: str = "predictions") -> TaskResult:
    """Train OLS, SVR and the MLP for ``task`` and assemble the evaluation.

    A model family that fails is recorded in ``failures`` and left out of the
    report instead of aborting the run.
    """
    grid = grid or {}
    sub = table.select(features)
    y = sub.label(task)
    split = split_train_validation(sub, train_fraction, seed)
    scaler = fit_minmax(sub, split)
    X = apply_minmax(sub.features, scaler)
    tr = list(split.train_indices)
    va = list(split.validation_indices)
    Xtr, ytr, Xva, yva = X[tr], y[tr], X[va], y[va]
    names = tuple(features)
    res = TaskResult(task, names, split, scaler)

    try:
        res.models["OLS"] = fit_ols(Xtr, ytr, intercept=True, feature_names=names)
        res.hyperparameters["OLS"] = {"intercept": True}
    except (PolarmlError, ValueError) as exc:
        res.failures["OLS"] = f"{type(exc).__name__}: {exc}"

    svr_base = dict(svr_params or {})
    try:
        if "SVM" in grid:
            g = grid_search("SVM", grid["SVM"], Xtr, ytr, Xva, yva, base=svr_base, feature_names=names)
            res.grids["SVM"] = g
            res.models["SVM"] = g.best_model
            res.hyperparameters["SVM"] = {**svr_base, **g.best_params}
        else:
            res.models["SVM"] = fit_svr(Xtr, ytr, feature_names=names, **svr_base)
            res.hyperparameters["SVM"] = svr_base
        m = res.models["SVM"]
        res.hyperparameters["SVM"].update(c_penalty=m.c_penalty, gamma=m.gamma,
                                        epsilon_tube=m.epsilon_tube)
    except (PolarmlError, ValueError) as exc:
        res.failures["SVM"] = f"{type(exc).__name__}: {exc}"

    cfg = replace(ann_config or TrainConfig(), seed=seed)
    try:
        if "ANN" in grid:
            g = grid_search("ANN", grid["ANN"], Xtr, ytr, Xva, yva, base={"config": cfg},
                            feature_names=names)
            res.grids["ANN"] = g
            res.models["ANN"] = g.best_model
        else:
            res.models["ANN"] = train_mlp(Xtr, ytr, Xva, yva, cfg, feature_names=names)
        res.hyperparameters["ANN"] = res.models["ANN"].config.to_dict()
    except (PolarmlError, ValueError) as exc:
        res.failures["ANN"] = f"{type(exc).__name__}: {exc}"

    for name, msg in res.failures.items():
        log.warning("%s model failed on %s task: %s", name, task, msg)
    if not res.models:
        raise PolarmlError(f"every model failed on the {task} task")

    preds = {k: res.models[k].predict(Xva) for k in MODEL_ORDER if k in res.models}
    res.report = EvalReport.build(task, yva, preds, [sub.rows[i] for i in va], seed)
    if len(preds) >= 2:
        res.comparisons = compare_models(res.report, alpha, wilcoxon_mode)
    try:
        res.ols_pvalues = ols_coefficient_pvalues(Xtr, ytr, names, intercept=False)
    except (PolarmlError, ValueError) as exc:
        res.failures["OLS_pvalues"] = f"{type(exc).__name__}: {exc}"
    return res


def fitted_values(res: TaskResult, table: DatasetTable, model_id: str) -> np.ndarray:
    X = apply_minmax(table.select(res.features).features, res.scaler)
    return res.models[model_id].predict(X)
