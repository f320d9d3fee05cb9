"""Experiment configuration plus the cross-validated benchmark and AL runners."""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .active import STRATEGIES, ActiveLearningTrace, run_al_loop
from .data import (DataError, Dataset, apply_log10_target, fit_normalizer, generate_synthetic_creep,
                   kfold_split, load_csv, transform, write_csv)
from .metrics import METRIC_ORDER, EvaluationReport, coverage, composite_metric, evaluate, mean_interval_width
from .models.registry import MODEL_NAMES, fit_model
from .physics import PhysicsSpec, augment_features, default_upper_bound, fit_physics_features
from .predictive import DEFAULT_Z

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


EXECUTION_KEYS = ("output_dir", "workers")


DEFAULT_CONFIG = {
    "dataset": {"source": "synthetic", "n": 500, "noise_sd": 0.1, "seed": 0},
    "target_column": "tf",
    "columns": {"temperature": "T", "stress": "stress", "composition": None, "temperature_unit": "K"},
    "preprocessing": {"log10_target": True, "normalize": True},
    "models": {"gpr": {}},
    "physics": {"ttp_kind": None, "ttp_constants": None, "include_sfe": False, "use_loss": False,
                "lambda1": 0.1, "lambda2": 0.1, "upper_bound": None},
    "cv": {"folds": 5},
    "seed": 0,
    "al": {"models": ["gpr"], "strategies": list(STRATEGIES), "batch_size": 10, "initial_size": None,
           "label_budget": None, "seeds": [0, 1, 2], "test_fraction": 0.2},
    "output_dir": "results",
    "interval_z": DEFAULT_Z,
    "workers": 1,
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "models":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description (defaults filled in)."""

    data: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(raw) - set(DEFAULT_CONFIG)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = _merge(DEFAULT_CONFIG, raw)
        models = cfg["models"]
        if isinstance(models, list):
            models = {name: {} for name in models}
        if not isinstance(models, dict) or not models:
            raise ConfigError("'models' must be a non-empty list or object")
        for name, overrides in models.items():
            if name not in MODEL_NAMES:
                raise ConfigError(f"unknown model {name!r}; choose from {list(MODEL_NAMES)}")
            if not isinstance(overrides, dict):
                raise ConfigError(f"overrides for {name!r} must be an object")
        cfg["models"] = models
        src = cfg["dataset"].get("source")
        if src not in ("synthetic", "csv"):
            raise ConfigError("dataset.source must be 'synthetic' or 'csv'")
        if src == "csv" and not cfg["dataset"].get("path"):
            raise ConfigError("dataset.path is required for a CSV source")
        if int(cfg["cv"]["folds"]) < 2:
            raise ConfigError("cv.folds must be at least 2")
        if float(cfg["interval_z"]) <= 0:
            raise ConfigError("interval_z must be positive")
        if int(cfg["workers"]) < 1:
            raise ConfigError("workers must be at least 1")
        al = cfg["al"]
        for s in al["strategies"]:
            if s not in STRATEGIES:
                raise ConfigError(f"unknown AL strategy {s!r}")
        for m in al["models"]:
            if m not in MODEL_NAMES:
                raise ConfigError(f"unknown AL model {m!r}")
        try:
            PhysicsSpec.from_dict(cls._physics_dict(cfg))
        except TypeError as exc:
            raise ConfigError(f"bad physics spec: {exc}") from None
        return cls(cfg)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        return cls.from_dict(raw)

    @staticmethod
    def _physics_dict(cfg: dict) -> dict:
        phys = dict(cfg["physics"])
        cols = cfg["columns"]
        phys["temperature_column"] = cols["temperature"]
        phys["stress_column"] = cols["stress"]
        if cols.get("composition"):
            phys["composition_columns"] = dict(cols["composition"])
        return phys

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True, default=_json_default)

    def results_view(self) -> dict:
        """Config as embedded in results: execution-only keys (output location,
        worker count) are left out since they never change the numbers."""
        return {k: v for k, v in self.data.items() if k not in EXECUTION_KEYS}

    @property
    def hash(self) -> str:
        return hashlib.sha256(canonical_json(self.results_view()).encode()).hexdigest()[:16]

    def physics(self) -> PhysicsSpec:
        return PhysicsSpec.from_dict(self._physics_dict(self.data))

    def with_overrides(self, seed: int | None = None, models: list[str] | None = None,
                       output_dir: str | None = None) -> "ExperimentConfig":
        cfg = copy.deepcopy(self.data)
        if seed is not None:
            cfg["seed"] = int(seed)
        if models:
            missing = [m for m in models if m not in cfg["models"] and m not in MODEL_NAMES]
            if missing:
                raise ConfigError(f"unknown models requested: {missing}")
            cfg["models"] = {m: cfg["models"].get(m, {}) for m in models}
            cfg["al"]["models"] = [m for m in models]
        if output_dir is not None:
            cfg["output_dir"] = str(output_dir)
        return ExperimentConfig.from_dict(cfg)


def load_dataset(config: ExperimentConfig) -> Dataset:
    """Raw dataset (log10 target if configured, features unscaled)."""
    cfg = config.data
    src = cfg["dataset"]
    if src["source"] == "synthetic":
        ds = generate_synthetic_creep(int(src.get("n", 500)), float(src.get("noise_sd", 0.1)),
                                      int(src.get("seed", 0)), src.get("generator"))
    else:
        ds = load_csv(src["path"], cfg["target_column"])
        ds = replace(ds, metadata={**ds.metadata, "temperature_unit": cfg["columns"]["temperature_unit"]})
    if cfg["preprocessing"]["log10_target"]:
        ds = apply_log10_target(ds)
    phys = config.physics()
    needed = []
    if phys.ttp_kind:
        needed += [phys.temperature_column, phys.stress_column]
    if phys.include_sfe:
        needed += list(phys.composition_columns.values())
    for name in needed:
        if name not in ds.feature_names:
            raise ConfigError(f"column {name!r} named in the config is not in the dataset header")
    return ds


def dataset_id(config: ExperimentConfig) -> str:
    src = config.data["dataset"]
    if src["source"] == "synthetic":
        return f"synthetic(n={src.get('n', 500)},noise_sd={src.get('noise_sd', 0.1)},seed={src.get('seed', 0)})"
    return Path(src["path"]).name


def task_seed(root: int, *keys) -> int:
    """Deterministic per-task seed from the root seed and string/int keys."""
    spawn = tuple(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in keys)
    return int(np.random.SeedSequence(int(root), spawn_key=spawn).generate_state(1)[0])


def prepare_fold(ds: Dataset, train_idx, test_idx, physics: PhysicsSpec, normalize: bool = True):
    """Physics features and scaling fitted on the training rows only.

    Returns ``(train, test, preprocessing)`` where ``preprocessing`` records
    every fitted statistic for audit.
    """
    train, test = ds.subset(train_idx), ds.subset(test_idx)
    ttp = fit_physics_features(train, physics)
    train = augment_features(train, ttp, physics.include_sfe, physics)
    test = augment_features(test, ttp, physics.include_sfe, physics)
    if normalize:
        train = fit_normalizer(train)
        test = transform(test, train.normalization_bounds)
    prep = {
        "feature_names": list(train.feature_names),
        "normalization_bounds": [list(b) for b in train.normalization_bounds] if normalize else None,
        "ttp": None if ttp is None else {"kind": ttp.kind, "constants": ttp.constants,
                                         "stress_poly": list(ttp.stress_poly)},
    }
    return train, test, prep


def _physics_loss(physics: PhysicsSpec, train_target) -> dict | None:
    if not physics.use_loss:
        return None
    a = physics.upper_bound if physics.upper_bound is not None else default_upper_bound(train_target)
    return {"lambda1": physics.lambda1, "lambda2": physics.lambda2, "upper_bound": float(a)}


def _run_fold(args):
    config_data, ds, model, fold, train_idx, test_idx = args
    config = ExperimentConfig(config_data)
    cfg = config.data
    physics = config.physics()
    z = float(cfg["interval_z"])
    try:
        train, test, prep = prepare_fold(ds, train_idx, test_idx, physics, cfg["preprocessing"]["normalize"])
        seed = task_seed(cfg["seed"], model, fold)
        fitted = fit_model(model, train.features, train.target, cfg["models"][model], seed,
                           _physics_loss(physics, train.target))
        pred = fitted.predict(test.features, z)
        metrics = evaluate(test.target, pred)
        record = {"index": [int(i) for i in test_idx], "y": test.target.tolist(), **pred.to_dict()}
        return {"fold": fold, "metrics": metrics, "predictions": record, "preprocessing": prep,
                "seed": seed, "fitted": fitted.summary(), "error": None}
    except Exception as exc:  # reported with context, other folds still run
        logger.error("model %s fold %d failed: %s", model, fold, exc)
        return {"fold": fold, "error": f"{type(exc).__name__}: {exc}"}


def _pooled_uq(folds: list[dict]) -> dict | None:
    """Coverage, width and composite over all held-out points at once."""
    preds = [f["predictions"] for f in folds if f.get("error") is None]
    if not preds or "lower" not in preds[0]:
        return None
    y = np.concatenate([p["y"] for p in preds])
    iv = np.column_stack([np.concatenate([p["lower"] for p in preds]), np.concatenate([p["upper"] for p in preds])])
    cov, width = coverage(y, iv), mean_interval_width(iv)
    return {"coverage": cov, "interval_width": width, "composite": composite_metric(cov, width)}


@dataclass
class BenchmarkResult:
    reports: dict[str, EvaluationReport]
    errors: list[str]


def run_benchmark(config: ExperimentConfig, out_dir=None) -> BenchmarkResult:
    """K-fold evaluation of every configured model; writes reports to ``out_dir``."""
    cfg = config.data
    out = Path(out_dir or cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    ds = load_dataset(config)
    split = kfold_split(ds.n_samples, int(cfg["cv"]["folds"]), int(cfg["seed"]))
    tasks = [(cfg, ds, model, k, tr, te) for model in cfg["models"] for k, (tr, te) in enumerate(split.folds())]
    workers = int(cfg["workers"])
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_fold, tasks))
    else:
        results = [_run_fold(t) for t in tasks]

    reports, errors = {}, []
    for model in cfg["models"]:
        folds = [r for (_, _, m, *_), r in zip(tasks, results) if m == model]
        report = EvaluationReport(model, dataset_id(config), config.hash)
        for f in folds:
            if f["error"] is None:
                report.add_fold(f["metrics"])
            else:
                errors.append(f"{model} fold {f['fold']}: {f['error']}")
        report.extra = {
            "config": config.results_view(),
            "dataset_metadata": ds.metadata,
            "pooled_uq": _pooled_uq(folds),
            "fold_details": [{k: v for k, v in f.items() if k != "metrics"} for f in folds],
        }
        reports[model] = report
        write_json(out / f"report_{model}.json", report.to_dict())
    write_tables(reports, out)
    return BenchmarkResult(reports, errors)


def write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def write_tables(reports: dict[str, EvaluationReport], out: Path) -> None:
    """``table.csv`` (mean and SD columns) and ``table.md`` (mean with SD subscript)."""
    from .metrics import METRIC_LABELS
    from .models.registry import MODEL_LABELS

    header = ["model"] + [f"{m}_{s}" for m in METRIC_ORDER for s in ("mean", "sd")]
    lines = [",".join(header)]
    md = ["| Model | " + " | ".join(METRIC_LABELS[m] for m in METRIC_ORDER) + " |",
          "|---" * (len(METRIC_ORDER) + 1) + "|"]
    for name, report in reports.items():
        summary = report.summary()
        row, cells = [name], []
        for m in METRIC_ORDER:
            if m in summary:
                row += [repr(summary[m]["mean"]), repr(summary[m]["sd"])]
                cells.append(f"{_fmt(summary[m]['mean'])}<sub>{_fmt(summary[m]['sd'])}</sub>")
            else:
                row += ["", ""]
                cells.append("")
        lines.append(",".join(row))
        md.append(f"| {MODEL_LABELS[name]} | " + " | ".join(cells) + " |")
    (out / "table.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / "table.md").write_text("\n".join(md) + "\n", encoding="utf-8")


def _run_al_task(args):
    ds, model, options, strategy, al, seed = args
    try:
        trace = run_al_loop(ds, model, strategy, int(al["batch_size"]), al["initial_size"], al["label_budget"],
                            int(seed), options, float(al["test_fraction"]))
        return trace, None
    except Exception as exc:  # reported with context, other replicates still run
        logger.error("AL %s/%s seed %s failed: %s", model, strategy, seed, exc)
        return None, f"{model}/{strategy}/seed {seed}: {type(exc).__name__}: {exc}"


def run_al(config: ExperimentConfig, out_dir=None) -> tuple[list[ActiveLearningTrace], list[str]]:
    """Every (model, strategy, seed) replicate; writes one trace CSV each."""
    cfg = config.data
    al = cfg["al"]
    out = Path(out_dir or cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    ds = load_dataset(config)
    tasks = [(ds, m, cfg["models"].get(m, {}), s, al, seed)
             for m in al["models"] for s in al["strategies"] for seed in al["seeds"]]
    if int(cfg["workers"]) > 1:
        with ProcessPoolExecutor(max_workers=int(cfg["workers"])) as pool:
            results = list(pool.map(_run_al_task, tasks))
    else:
        results = [_run_al_task(t) for t in tasks]
    traces, errors = [], []
    for trace, err in results:
        if err:
            errors.append(err)
            continue
        traces.append(trace)
        (out / f"trace_{trace.model}_{trace.strategy}_{trace.seed}.csv").write_text(trace.to_csv(), encoding="utf-8")
    write_json(out / "al_config.json", {"config": config.results_view(), "config_hash": config.hash})
    return traces, errors


def write_synthetic(config: ExperimentConfig, out_dir=None) -> Path:
    cfg = config.data
    out = Path(out_dir or cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    src = cfg["dataset"]
    if src["source"] != "synthetic":
        raise ConfigError("synth needs a synthetic dataset source")
    ds = generate_synthetic_creep(int(src.get("n", 500)), float(src.get("noise_sd", 0.1)),
                                  int(src.get("seed", 0)), src.get("generator"))
    path = out / "synthetic.csv"
    write_csv(ds, path)
    write_json(out / "synthetic_metadata.json", ds.metadata)
    return path


__all__ = ["ConfigError", "DataError", "ExperimentConfig", "run_benchmark", "run_al", "write_synthetic"]
