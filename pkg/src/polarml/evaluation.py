"""Validation scoring, model choice, pairwise signed-rank comparison and
prediction on unlabeled years."""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from .dataset import DatasetTable, ScalerParams, apply_minmax
from .errors import DegenerateTestError, SchemaError
from .models import MODEL_ORDER, predict_model
from .stats import wilcoxon_signed_rank

DEFAULT_ALPHA = 0.05


def rmse(y, yhat) -> float:
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.size != yhat.size:
        raise ValueError(f"length mismatch: {y.size} vs {yhat.size}")
    if y.size == 0:
        raise ValueError("rmse of empty vectors")
    d = yhat - y
    return math.sqrt(float(d @ d) / d.size)


class BestModel(NamedTuple):
    model_id: str
    tied_with: tuple

    @property
    def tie(self) -> bool:
        return bool(self.tied_with)


def _order_key(name):
    return (MODEL_ORDER.index(name), "") if name in MODEL_ORDER else (len(MODEL_ORDER), name)


def select_best(scores: Mapping[str, float]) -> BestModel:
    """Model with the lowest RMSE.

    Exact ties are resolved by the fixed order OLS, SVM, ANN (other names after,
    alphabetically) and reported in ``tied_with``.
    """
    if not scores:
        raise ValueError("no models to choose from")
    for name, v in scores.items():
        if not math.isfinite(v):
            raise ValueError(f"non-finite RMSE for {name!r}")
    low = min(scores.values())
    winners = sorted((k for k, v in scores.items() if v == low), key=_order_key)
    return BestModel(winners[0], tuple(winners[1:]))


@dataclass(frozen=True)
class EvalReport:
    task: str
    rmse: dict
    chosen_model: str
    predictions: dict
    y_true: np.ndarray
    validation_rows: tuple
    seed: int
    tied_with: tuple = ()

    @classmethod
    def build(cls, task, y_val, predictions: Mapping[str, np.ndarray], validation_rows, seed):
        ordered = dict(sorted(predictions.items(), key=lambda kv: _order_key(kv[0])))
        preds = {k: np.asarray(v, dtype=float) for k, v in ordered.items()}
        for k, v in preds.items():
            if v.shape != (len(validation_rows),):
                raise ValueError(f"{k}: prediction count differs from validation row count")
        scores = {k: rmse(y_val, v) for k, v in preds.items()}
        best = select_best(scores)
        return cls(task, scores, best.model_id, preds, np.asarray(y_val, dtype=float),
                   tuple(validation_rows), seed, best.tied_with)

    @property
    def prediction_matrix(self) -> np.ndarray:
        return np.column_stack(list(self.predictions.values()))

    def to_dict(self) -> dict:
        return {"task": self.task, "seed": self.seed,
                "rmse": self.rmse, "chosen_model": self.chosen_model,
                "tied_with": list(self.tied_with),
                "validation_rows": [[k.state, k.year] for k in self.validation_rows],
                "y_true": self.y_true.tolist(),
                "predictions": {k: v.tolist() for k, v in self.predictions.items()}}

    @classmethod
    def from_dict(cls, doc):
        from .dataset import RowKey
        return cls(doc["task"], doc["rmse"], doc["chosen_model"],
                   {k: np.asarray(v) for k, v in doc["predictions"].items()},
                   np.asarray(doc["y_true"]), tuple(RowKey(s, y) for s, y in doc["validation_rows"]),
                   doc["seed"], tuple(doc.get("tied_with", ())))

    def table_text(self) -> str:
        lines = [f"validation set results, v = {len(self.validation_rows)} samples ({self.task})",
                 f"{'Model':<8}{'RMSE':>8}"]
        for name, v in self.rmse.items():
            mark = "  *best" if name == self.chosen_model else ""
            lines.append(f"{name:<8}{v:>8.3f}{mark}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PairComparison:
    model_a: str
    model_b: str
    result: object = None
    error: str | None = None
    alpha: float = DEFAULT_ALPHA

    @property
    def pair(self) -> str:
        return f"{self.model_a}-{self.model_b}"

    @property
    def significant(self) -> bool | None:
        """True when the two prediction samples look drawn from distinct distributions."""
        return None if self.result is None else self.result.significant(self.alpha)

    def to_dict(self) -> dict:
        d = {"pair": self.pair, "alpha": self.alpha, "error": self.error}
        if self.result is not None:
            d.update(self.result.to_dict(), significant=self.significant)
        return d


def compare_models(report: EvalReport, alpha: float = DEFAULT_ALPHA, mode: str = "predictions"):
    """Signed-rank test on every unordered model pair.

    ``mode="predictions"`` pairs the raw validation predictions;
    ``mode="errors"`` pairs absolute errors instead. A degenerate pair is kept
    with its error message rather than aborting the table.
    """
    if mode not in ("predictions", "errors"):
        raise ValueError("mode must be 'predictions' or 'errors'")
    if len(report.predictions) < 2:
        raise ValueError("need at least two models to compare")
    vals = report.predictions
    if mode == "errors":
        vals = {k: np.abs(v - report.y_true) for k, v in vals.items()}
    out = []
    for a, b in itertools.combinations(vals, 2):
        try:
            out.append(PairComparison(a, b, wilcoxon_signed_rank(vals[a], vals[b]), alpha=alpha))
        except DegenerateTestError as exc:
            out.append(PairComparison(a, b, None, str(exc), alpha))
    return out


def comparison_rows(comparisons) -> list:
    rows = []
    for c in comparisons:
        if c.result is None:
            rows.append([c.pair, "", "", "", "", c.error])
        else:
            r = c.result
            rows.append([c.pair, r.w_statistic, r.n_effective, r.p_two_tailed,
                         int(c.significant), ""])
    return rows


@dataclass(frozen=True)
class PredictionSet:
    rows: tuple
    predictions: np.ndarray
    model_id: str
    task: str
    flagged: tuple = field(default=())

    def __post_init__(self):
        p = np.array(self.predictions, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "predictions", p)
        if not self.flagged:
            object.__setattr__(self, "flagged", tuple(bool(v <= 0) for v in p))
        if len(set(self.rows)) != len(self.rows):
            raise ValueError("duplicate row keys in prediction set")

    def to_rows(self) -> list:
        return [[k.state, k.year, float(v), self.model_id, int(f)]
                for k, v, f in zip(self.rows, self.predictions, self.flagged)]


def predict_unlabeled(model, scaler: ScalerParams, table: DatasetTable, task: str = "house",
                      model_id: str | None = None, schema=None) -> PredictionSet:
    """Scale ``table`` with the training scaler and predict every (state, year).

    ``schema`` is the full feature list of the training input (defaults to the
    model's own features); the table's columns must match it exactly.
    Non-positive predictions are kept and flagged, since valid labels are
    strictly positive.
    """
    names = tuple(getattr(model, "feature_names", ()) or scaler.feature_names)
    if tuple(scaler.feature_names) != names:
        raise SchemaError("model and scaler feature names differ")
    schema = tuple(schema) if schema is not None else names
    missing = [c for c in schema if c not in table.feature_names]
    extra = [c for c in table.feature_names if c not in schema]
    if extra:
        raise SchemaError("unknown feature column in prediction table", column=extra[0])
    if missing:
        raise SchemaError("feature missing from prediction table", column=missing[0])
    if not set(names) <= set(schema):
        raise SchemaError("model features are not part of the training schema")
    if table.has_labels:
        warnings.warn("prediction table carries labels; they are ignored", stacklevel=2)
    X = apply_minmax(table.select(names).features, scaler)
    preds = predict_model(model, X)
    return PredictionSet(table.rows, preds, model_id or model.family, task)
