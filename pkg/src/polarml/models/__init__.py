"""The three regressors behind one ``predict`` contract, plus JSON persistence."""
import json

import numpy as np

from .grid import GridResult, expand_grid, grid_search
from .mlp import MlpModel, TrainConfig, train_mlp
from .ols import OlsModel, fit_ols, ols_coefficient_pvalues
from .svr import SvrModel, fit_svr, rbf_kernel

MODEL_ORDER = ("OLS", "SVM", "ANN")
_CLASSES = {"OLS": OlsModel, "SVM": SvrModel, "ANN": MlpModel}
FORMAT_VERSION = 1


def predict_model(model, X) -> np.ndarray:
    """Inference-mode predictions for any trained model (dropout disabled)."""
    return model.predict(X)


def model_to_dict(model, scaler=None, seed=None, hyperparameters=None) -> dict:
    doc = {"format_version": FORMAT_VERSION, "family": model.family,
           "feature_names": list(model.feature_names),
           "hyperparameters": dict(hyperparameters or {}),
           "parameters": model.params(), "seed": seed,
           "scaler": None if scaler is None else scaler.to_dict()}
    if isinstance(model, MlpModel):
        doc["best_epoch"] = model.best_epoch
        if model.config is not None:
            doc["hyperparameters"] = {**model.config.to_dict(), **doc["hyperparameters"]}
    return doc


def model_from_dict(doc: dict):
    family = doc["family"]
    if family not in _CLASSES:
        raise ValueError(f"unknown model family {family!r}")
    names = tuple(doc.get("feature_names", ()))
    if family == "ANN":
        hp = doc.get("hyperparameters") or {}
        fields = TrainConfig.__dataclass_fields__
        cfg = TrainConfig(**{k: v for k, v in hp.items() if k in fields}) if hp else None
        return MlpModel.from_params(doc["parameters"], names, config=cfg)
    return _CLASSES[family].from_params(doc["parameters"], names)


def save_model(path, model, scaler=None, seed=None, hyperparameters=None) -> None:
    # float repr round-trips exactly, so reloaded predictions are bit-identical
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model, scaler, seed, hyperparameters), fh, indent=1)
        fh.write("\n")


def load_model(path):
    """Return ``(model, scaler_or_None, document)``."""
    from ..dataset import ScalerParams

    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    scaler = ScalerParams.from_dict(doc["scaler"]) if doc.get("scaler") else None
    return model_from_dict(doc), scaler, doc


__all__ = ["GridResult", "MODEL_ORDER", "MlpModel", "OlsModel", "SvrModel", "TrainConfig",
           "expand_grid", "fit_ols", "fit_svr", "grid_search", "load_model", "model_from_dict",
           "model_to_dict", "ols_coefficient_pvalues", "predict_model", "rbf_kernel",
           "save_model", "train_mlp"]
