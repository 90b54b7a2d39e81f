"""Command-line driver: ``validate``, ``explore``, ``train`` and ``predict``.

Exit codes: 0 success, 1 input validation failure, 2 runtime or model failure.
Each command records its resolved configuration and the SHA-256 of its
inputs in ``<out>/run_manifest.json``; ``--manifest`` replays a recorded run.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import warnings
from pathlib import Path

from . import __version__
from .dataset import TASKS, load_table, split_train_validation
from .errors import DataError, PolarmlError
from .evaluation import comparison_rows, predict_unlabeled
from .fixtures import data_path
from .models import TrainConfig, load_model, save_model
from .pipeline import default_grid_path, load_grid, run_task
from .stats import (DEFAULT_LAMBDA, DEFAULT_THRESHOLD, correlation_matrix, correlation_pairs,
                    flag_nonlinear, select_features)

log = logging.getLogger("polarml")

OUT_ENV = "POLARML_OUT"
DEFAULT_OUT = "polarml_out"
MANIFEST = "run_manifest.json"


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _tasks(selector: str):
    return TASKS if selector == "both" else (selector,)


class Run:
    """Per-invocation bookkeeping: output root, written files, manifest entry."""

    def __init__(self, command: str, config: dict):
        self.command = command
        self.config = config
        self.out = Path(config["out"])
        self.outputs = {}

    def write(self, rel: str, text: str) -> None:
        _write(self.out / rel, text)
        self.outputs[rel] = hashlib.sha256(text.encode("utf-8")).hexdigest()

    def commit(self, inputs) -> None:
        path = self.out / MANIFEST
        doc = {}
        if path.is_file():
            try:
                doc = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                doc = {}
        doc[self.command] = {
            "polarml_version": __version__,
            "config": self.config,
            "inputs": {k: {"path": str(p), "sha256": _sha256(p)} for k, p in inputs.items()},
            "outputs": dict(sorted(self.outputs.items())),
        }
        _write(path, _json(dict(sorted(doc.items()))))


# ---------------------------------------------------------------- commands

def cmd_validate(cfg: dict, run: Run) -> int:
    inputs = {"input": cfg["input"]}
    report = {}
    table = load_table(cfg["input"], labels_expected=True)
    report["input"] = _shape(table)
    lines = [_shape_line("input", table)]
    if cfg.get("future"):
        inputs["future"] = cfg["future"]
        fut = load_table(cfg["future"], schema=table.feature_names, labels_expected=None)
        report["future"] = _shape(fut)
        lines.append(_shape_line("future", fut))
    if table.m >= 2:
        sp = split_train_validation(table, cfg["train_fraction"], cfg["seed"])
        report["split"] = {"train": len(sp.train_indices), "validation": len(sp.validation_indices),
                           "seed": cfg["seed"]}
        lines.append(f"split: {len(sp.train_indices)} train / {len(sp.validation_indices)} "
                     f"validation (seed {cfg['seed']})")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    run.write("validate/report.json", _json(report))
    run.write("validate/report.txt", text)
    run.commit(inputs)
    return 0


def _shape(table) -> dict:
    return {"rows": table.m, "features": table.n, "labels": table.has_labels,
            "feature_names": list(table.feature_names),
            "years": sorted({k.year for k in table.rows}),
            "states": len({k.state for k in table.rows}),
            "sorted_on_input": table.source_sorted}


def _shape_line(what, table) -> str:
    order = ("rows in (year, state) order" if table.source_sorted
             else "rows were not in (year, state) order; re-sort applied")
    labels = "House and Senate labels present" if table.has_labels else "no labels"
    return f"{what}: {table.m} rows, {table.n} features, {labels}; {order}"


def cmd_explore(cfg: dict, run: Run) -> int:
    table = load_table(cfg["input"], labels_expected=True)
    pairs = correlation_pairs(table)
    selected = select_features(pairs, cfg["threshold"])
    run.write("explore/correlation_pairs.csv",
              _csv(["feature", "r_house", "r_senate"], [list(p) for p in pairs]))
    flags = {}
    flag_rows = []
    for task in TASKS:
        rep = flag_nonlinear(table.features, table.label(task), table.feature_names,
                             cfg["lambda"], label_name=task)
        flags[task] = rep.to_dict()
        flag_rows += rep.to_rows()
        if selected:
            mat, names = correlation_matrix(table, task, selected)
            run.write(f"explore/correlation_matrix_{task}.csv",
                      _csv(["name", *names], [[n, *map(float, row)] for n, row in zip(names, mat)]))
            run.write(f"explore/correlation_matrix_{task}.json",
                      _json({"names": names, "matrix": mat.tolist()}))
    run.write("explore/flags.csv",
              _csv(["label", "feature", "pearson", "spearman", "gap", "flagged"], flag_rows))
    run.write("explore/flags.json", _json(flags))
    run.write("explore/selected_features.json",
              _json({"threshold": cfg["threshold"], "features": selected}))
    print(f"{len(selected)} of {table.n} features selected at |r| >= {cfg['threshold']}:")
    for name in selected:
        print(f"  {name}")
    for task in TASKS:
        fl = [e["feature_name"] for e in flags[task]["entries"] if e["flagged"]]
        print(f"{task}: {len(fl)} flagged at lambda={cfg['lambda']}: {', '.join(fl) or '-'}")
    run.commit({"input": cfg["input"]})
    return 0


def _ann_config(cfg) -> TrainConfig:
    return TrainConfig(**{k: v for k, v in (cfg.get("ann") or {}).items()})


def cmd_train(cfg: dict, run: Run) -> int:
    table = load_table(cfg["input"], labels_expected=True)
    inputs = {"input": cfg["input"]}
    if cfg.get("features"):
        features = list(cfg["features"])
    else:
        features = select_features(correlation_pairs(table), cfg["threshold"])
    if not features:
        raise DataError("no features survive selection")
    grid = {}
    if cfg.get("grid"):
        inputs["grid"] = cfg["grid"]
        grid = load_grid(cfg["grid"])
    status = 0
    for task in _tasks(cfg["task"]):
        res = run_task(table, task, features, seed=cfg["seed"],
                       train_fraction=cfg["train_fraction"], grid=grid,
                       svr_params=cfg.get("svr"), ann_config=_ann_config(cfg),
                       alpha=cfg["alpha"], wilcoxon_mode=cfg["wilcoxon_mode"])
        _write_task(run, res, table)
        if res.failures:
            status = 2
        print(res.report.table_text(), end="")
        for c in res.comparisons:
            if c.result is None:
                print(f"  {c.pair}: {c.error}")
            else:
                print(f"  {c.pair}: W={c.result.w_statistic:g} p={c.result.p_two_tailed:.3g}"
                      f"{' (significant)' if c.significant else ''}")
    run.commit(inputs)
    return status


def _write_task(run: Run, res, table) -> None:
    t = res.task
    run.write(f"{t}/scaler.json", res.scaler.to_json() + "\n")
    for name, model in res.models.items():
        doc_path = run.out / t / "models" / f"{name}.json"
        doc_path.parent.mkdir(parents=True, exist_ok=True)
        save_model(doc_path, model, res.scaler, run.config["seed"], res.hyperparameters.get(name))
        run.outputs[f"{t}/models/{name}.json"] = _sha256(doc_path)
    if "ANN" in res.models:
        run.write(f"{t}/ann_history.csv", _csv(["epoch", "train_rmse", "validation_rmse"],
                                               res.models["ANN"].history))
    for fam, g in res.grids.items():
        rows = g.to_rows()
        keys = [k for k in rows[0] if k not in ("validation_rmse", "error")]
        run.write(f"{t}/grid_{fam}.csv", _csv([*keys, "validation_rmse", "error"],
                                              [[r[k] for k in keys] + [r["validation_rmse"],
                                                                       r["error"] or ""]
                                               for r in rows]))
    run.write(f"{t}/eval_report.json", _json(res.report.to_dict()))
    run.write(f"{t}/rmse_table.txt", res.report.table_text())
    run.write(f"{t}/wilcoxon.json", _json([c.to_dict() for c in res.comparisons]))
    run.write(f"{t}/wilcoxon.csv", _csv(["pair", "W", "n_eff", "p", "significant", "error"],
                                        comparison_rows(res.comparisons)))
    if res.ols_pvalues is not None:
        run.write(f"{t}/ols_pvalues.csv",
                  _csv(["feature", "coefficient", "std_error", "t", "p"],
                       [list(r) for r in res.ols_pvalues.rows]))
    run.write(f"{t}/training_info.json", _json({
        "task": t, "input_schema": list(table.feature_names), "features": list(res.features),
        "chosen_model": res.report.chosen_model, "tied_with": list(res.report.tied_with),
        "split": {"seed": res.split.seed, "train": list(res.split.train_indices),
                  "validation": list(res.split.validation_indices)},
        "hyperparameters": res.hyperparameters,
    }))
    if res.failures:
        run.write(f"{t}/failures.json", _json(res.failures))


def cmd_predict(cfg: dict, run: Run) -> int:
    if not cfg.get("future"):
        raise DataError("--future is required for predict")
    models_dir = Path(cfg.get("models") or cfg["out"])
    inputs = {"future": cfg["future"]}
    for task in _tasks(cfg["task"]):
        info_path = models_dir / task / "training_info.json"
        if not info_path.is_file():
            raise FileNotFoundError(f"{info_path}: no trained {task} model (run train first)")
        info = json.loads(info_path.read_text(encoding="utf-8"))
        model_id = cfg.get("model") or info["chosen_model"]
        model_path = models_dir / task / "models" / f"{model_id}.json"
        if not model_path.is_file():
            raise FileNotFoundError(f"{model_path}: model file missing")
        inputs[f"{task}_model"] = str(model_path)
        model, scaler, _ = load_model(model_path)
        fut = load_table(cfg["future"], labels_expected=None)
        pset = predict_unlabeled(model, scaler, fut, task, model_id, schema=info["input_schema"])
        rel = f"predictions_{task}.csv"
        run.write(rel, _csv(["state", "year", "predicted_polarization", "model_id", "flagged"],
                            pset.to_rows()))
        n_flag = sum(pset.flagged)
        print(f"{task}: {len(pset.rows)} predictions with {model_id} -> {run.out / rel}"
              + (f" ({n_flag} non-positive, flagged)" if n_flag else ""))
    run.commit(inputs)
    return 0


COMMANDS = {"validate": cmd_validate, "explore": cmd_explore, "train": cmd_train,
            "predict": cmd_predict}


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polarml", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--input", help="labeled panel CSV (default: bundled fixture)")
        sp.add_argument("--future", help="unlabeled feature CSV to predict")
        sp.add_argument("--task", choices=("house", "senate", "both"), default="both")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--train-fraction", type=float, default=0.8)
        sp.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
        sp.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
        sp.add_argument("--alpha", type=float, default=0.05)
        sp.add_argument("--grid", help="JSON hyperparameter grid file")
        sp.add_argument("--default-grid", action="store_true",
                        help="use the bundled default grid")
        sp.add_argument("--features", help="comma-separated feature list (skips selection)")
        sp.add_argument("--ann-epochs", type=int)
        sp.add_argument("--ann-batch-size", type=int)
        sp.add_argument("--wilcoxon-mode", choices=("predictions", "errors"),
                        default="predictions")
        sp.add_argument("--models", help="directory holding trained models (predict)")
        sp.add_argument("--model", help="model id to predict with instead of the best one")
        sp.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or {DEFAULT_OUT})")
        sp.add_argument("--manifest", help="replay the configuration recorded in a run manifest")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def _config(args) -> dict:
    if args.manifest:
        doc = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        if args.command not in doc:
            raise DataError(f"manifest has no {args.command!r} entry", path=args.manifest)
        entry = doc[args.command]
        for key, inp in entry["inputs"].items():
            if not Path(inp["path"]).is_file() or _sha256(inp["path"]) != inp["sha256"]:
                raise DataError(f"input {key!r} changed since the manifest was recorded",
                                path=inp["path"])
        cfg = dict(entry["config"])
        if args.out:
            cfg["out"] = args.out
        return cfg
    if args.train_fraction <= 0 or args.train_fraction >= 1:
        raise DataError("--train-fraction must lie in (0, 1)")
    if args.lam < 0 or args.threshold < 0:
        raise DataError("--lambda and --threshold must be non-negative")
    grid = args.grid or (str(default_grid_path()) if args.default_grid else None)
    ann = {}
    if args.ann_epochs:
        ann["max_epochs"] = args.ann_epochs
    if args.ann_batch_size:
        ann["batch_size"] = args.ann_batch_size
    cfg = {
        "command": args.command,
        "input": str(args.input or data_path("panel")),
        "future": args.future,
        "task": args.task,
        "seed": args.seed,
        "train_fraction": args.train_fraction,
        "lambda": args.lam,
        "threshold": args.threshold,
        "alpha": args.alpha,
        "grid": grid,
        "features": args.features.split(",") if args.features else None,
        "ann": ann,
        "svr": {},
        "wilcoxon_mode": args.wilcoxon_mode,
        "models": args.models,
        "model": args.model,
        "out": args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT,
    }
    paths = [p for p in (cfg["input"], cfg["future"], cfg["grid"]) if p]
    if len(set(map(os.path.abspath, paths))) != len(paths):
        raise DataError("input, future and grid paths must be distinct")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        run = Run(args.command, cfg)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](cfg, run)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (PolarmlError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
