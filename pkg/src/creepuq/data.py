"""Dataset loading, preprocessing, fold assignment and synthetic creep data."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

# Larson-Miller ground truth for the synthetic generator: log10 tf = f(stress)/T - C_LM,
# with f a cubic in log10(stress). Chosen so log10 tf spans roughly 0..7.6 over the ranges below.
SYNTHETIC_CONFIG = {
    "temperature_range_K": (873.0, 1073.0),
    "stress_range_MPa": (40.0, 300.0),
    "c_lm": 20.0,
    "stress_poly": (27200.0, -1500.0, -200.0, -50.0),
    "inert_columns": {"Ni": (10.0, 14.0), "Cr": (16.0, 18.5), "Mo": (2.0, 3.0), "Mn": (1.0, 2.0)},
}


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix, target vector and preprocessing state.

    ``metadata`` carries free-form provenance (dropped row count, temperature
    unit, generator coefficients) and is written next to every result.
    """

    features: np.ndarray
    target: np.ndarray
    feature_names: tuple[str, ...]
    target_name: str = "tf"
    target_transformed: bool = False
    normalization_bounds: tuple[tuple[float, float], ...] | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        y = np.array(self.target, dtype=np.float64).reshape(-1)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise DataError(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
        if X.shape[1] != len(self.feature_names):
            raise DataError(f"{X.shape[1]} feature columns but {len(self.feature_names)} names")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.features[:, self.feature_names.index(name)]
        except ValueError:
            raise DataError(f"missing column {name!r}") from None

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=int)
        return replace(self, features=self.features[indices], target=self.target[indices])

    def with_columns(self, names: Sequence[str], values: np.ndarray) -> "Dataset":
        values = np.asarray(values, dtype=np.float64).reshape(self.n_samples, len(names))
        return replace(self, features=np.hstack([self.features, values]),
                       feature_names=self.feature_names + tuple(names))

    def metadata_json(self) -> str:
        payload = {
            "feature_names": list(self.feature_names),
            "target_name": self.target_name,
            "target_transformed": self.target_transformed,
            "n_samples": self.n_samples,
            "normalization_bounds": None if self.normalization_bounds is None
            else [list(b) for b in self.normalization_bounds],
            "metadata": self.metadata,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def load_csv(path, target_column: str) -> Dataset:
    """Read a numeric CSV; every column except ``target_column`` becomes a feature.

    Rows with any empty cell are dropped; the count is stored in
    ``metadata["dropped_rows"]``.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        if target_column not in header:
            raise DataError(f"missing target column {target_column!r} in {path}")
        rows, dropped = [], 0
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"row {line_no} has {len(row)} cells, header has {len(header)}")
            cells = [c.strip() for c in row]
            if any(c == "" for c in cells):
                dropped += 1
                continue
            values = []
            for col, cell in zip(header, cells):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"non-numeric cell {cell!r} at row {line_no}, column {col!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"non-finite cell {cell!r} at row {line_no}, column {col!r}")
                values.append(v)
            rows.append(values)
    if not rows:
        raise DataError(f"no usable rows in {path}")
    table = np.array(rows)
    t_idx = header.index(target_column)
    f_idx = [i for i in range(len(header)) if i != t_idx]
    return Dataset(
        features=table[:, f_idx],
        target=table[:, t_idx],
        feature_names=tuple(header[i] for i in f_idx),
        target_name=target_column,
        metadata={"source": str(path), "dropped_rows": dropped},
    )


def write_csv(ds: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*ds.feature_names, ds.target_name])
        for x, y in zip(ds.features, ds.target):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def apply_log10_target(ds: Dataset) -> Dataset:
    if ds.target_transformed:
        raise DataError("log10 transform already applied to the target")
    bad = np.flatnonzero(ds.target <= 0)
    if bad.size:
        raise DataError(f"non-positive target value {ds.target[bad[0]]} at index {bad[0]}")
    return replace(ds, target=np.log10(ds.target), target_transformed=True)


def fit_normalizer(ds: Dataset) -> Dataset:
    """Min-max scale every feature to [0, 1] using this dataset's own bounds."""
    if ds.n_samples < 2:
        raise DataError("at least 2 rows are needed to fit a normalizer")
    bounds = tuple((float(lo), float(hi)) for lo, hi in zip(ds.features.min(axis=0), ds.features.max(axis=0)))
    return transform(ds, bounds)


def _bounds_arrays(bounds):
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    span = hi - lo
    return lo, np.where(span > 0, span, 1.0), span > 0


def transform(ds: Dataset, bounds) -> Dataset:
    """Scale with externally fitted bounds. Values outside the bounds are not clipped;
    constant columns (zero span) map to 0."""
    if len(bounds) != ds.n_features:
        raise DataError(f"bounds cover {len(bounds)} columns, dataset has {ds.n_features}")
    lo, span, varying = _bounds_arrays(bounds)
    X = np.where(varying, (ds.features - lo) / span, 0.0)
    return replace(ds, features=X, normalization_bounds=tuple(tuple(map(float, b)) for b in bounds))


def inverse_transform(ds: Dataset) -> Dataset:
    if ds.normalization_bounds is None:
        raise DataError("dataset is not normalized")
    lo, span, _ = _bounds_arrays(ds.normalization_bounds)
    return replace(ds, features=ds.features * span + lo, normalization_bounds=None)


@dataclass(frozen=True)
class FoldSplit:
    fold_count: int
    assignments: np.ndarray
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def folds(self):
        for k in range(self.fold_count):
            yield self.train_indices(k), self.test_indices(k)


def kfold_split(n: int, k: int, seed: int) -> FoldSplit:
    """Shuffled, balanced assignment of ``n`` samples to ``k`` folds."""
    if k < 2:
        raise DataError(f"fold count must be at least 2, got {k}")
    if k > n:
        raise DataError(f"fold count {k} exceeds sample count {n}")
    order = np.random.default_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=int)
    assignments[order] = np.arange(n) % k
    return FoldSplit(fold_count=k, assignments=assignments, seed=seed)


def generate_synthetic_creep(n: int, noise_sd: float, seed: int, config: dict | None = None) -> Dataset:
    """Creep-life data following a Larson-Miller law in Kelvin.

    Target is rupture life in hours (untransformed); apply
    :func:`apply_log10_target` to work in log10 hours.
    """
    if n < 1:
        raise DataError("n must be at least 1")
    if noise_sd < 0:
        raise DataError("noise_sd must be non-negative")
    cfg = {**SYNTHETIC_CONFIG, **(config or {})}
    rng = np.random.default_rng(seed)
    T = rng.uniform(*cfg["temperature_range_K"], n)
    stress = rng.uniform(*cfg["stress_range_MPa"], n)
    inert = {name: rng.uniform(lo, hi, n) for name, (lo, hi) in cfg["inert_columns"].items()}
    c = np.asarray(cfg["stress_poly"], dtype=np.float64)
    L = np.log10(stress)
    f = c[0] + c[1] * L + c[2] * L ** 2 + c[3] * L ** 3
    log_tf = f / T - cfg["c_lm"] + rng.normal(0.0, 1.0, n) * noise_sd
    names = ("T", "stress", *inert)
    X = np.column_stack([T, stress, *inert.values()])
    return Dataset(
        features=X,
        target=10.0 ** log_tf,
        feature_names=names,
        target_name="tf",
        metadata={
            "source": "synthetic",
            "temperature_unit": "K",
            "temperature_column": "T",
            "stress_column": "stress",
            "noise_sd": float(noise_sd),
            "seed": int(seed),
            "generator": {
                "kind": "larson_miller",
                "c_lm": float(cfg["c_lm"]),
                "stress_poly": [float(v) for v in c],
            },
        },
    )
