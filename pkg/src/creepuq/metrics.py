"""Accuracy and uncertainty-quality metrics, and per-fold report aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .predictive import PredictiveDistribution

ACCURACY_METRICS = ("pcc", "r2", "rmse", "mae")
UQ_METRICS = ("coverage", "interval_width", "composite")
METRIC_ORDER = ACCURACY_METRICS + UQ_METRICS
METRIC_LABELS = {
    "pcc": "PCC",
    "r2": "R2",
    "rmse": "RMSE",
    "mae": "MAE",
    "coverage": "Coverage",
    "interval_width": "Interval width",
    "composite": "Composite metric",
}


class MetricError(ValueError):
    pass


def _pair(y, y_pred):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.float64).reshape(-1)
    if y.shape != y_pred.shape:
        raise MetricError(f"length mismatch: {y.size} targets vs {y_pred.size} predictions")
    if y.size == 0:
        raise MetricError("empty input")
    return y, y_pred


def pcc(y, y_pred) -> float:
    """Pearson correlation coefficient."""
    y, y_pred = _pair(y, y_pred)
    if y.size < 2:
        raise MetricError("PCC needs at least 2 points")
    dy, dp = y - y.mean(), y_pred - y_pred.mean()
    sy, sp = math.sqrt(dy @ dy), math.sqrt(dp @ dp)
    if sy == 0 or sp == 0:
        raise MetricError("PCC is undefined for a constant vector")
    return float(np.clip((dy @ dp) / (sy * sp), -1.0, 1.0))


def r_squared(y, y_pred) -> float:
    y, y_pred = _pair(y, y_pred)
    if y.size < 2:
        raise MetricError("R2 needs at least 2 points")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        raise MetricError("R2 is undefined for a constant target")
    return 1.0 - float(np.sum((y - y_pred) ** 2)) / ss_tot


def rmse(y, y_pred) -> float:
    y, y_pred = _pair(y, y_pred)
    return math.sqrt(float(np.mean((y - y_pred) ** 2)))


def mae(y, y_pred) -> float:
    y, y_pred = _pair(y, y_pred)
    return float(np.mean(np.abs(y - y_pred)))


def _intervals(intervals) -> np.ndarray:
    iv = np.asarray(intervals, dtype=np.float64).reshape(-1, 2)
    if np.any(iv[:, 0] > iv[:, 1]):
        raise MetricError("inverted interval (lower > upper)")
    return iv


def coverage(y, intervals) -> float:
    """Fraction of targets inside their closed interval."""
    iv = _intervals(intervals)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != iv.shape[0]:
        raise MetricError("targets and intervals differ in length")
    return float(np.mean((iv[:, 0] <= y) & (y <= iv[:, 1])))


def mean_interval_width(intervals) -> float:
    iv = _intervals(intervals)
    return float(np.mean(iv[:, 1] - iv[:, 0]))


def composite_metric(coverage_fraction: float, width: float) -> float | None:
    """``0.75 * coverage + 0.25 / width``; ``None`` when the width is zero."""
    if not 0.0 <= coverage_fraction <= 1.0:
        raise MetricError("coverage must be a fraction in [0, 1]")
    if width < 0:
        raise MetricError("interval width must be non-negative")
    if width == 0:
        return None
    return 0.75 * coverage_fraction + 0.25 / width


def evaluate(y, pred: PredictiveDistribution) -> dict:
    """All applicable metrics for one set of predictions."""
    out = {
        "pcc": pcc(y, pred.mean),
        "r2": r_squared(y, pred.mean),
        "rmse": rmse(y, pred.mean),
        "mae": mae(y, pred.mean),
    }
    if pred.has_uncertainty:
        iv = pred.intervals()
        cov = coverage(y, iv)
        width = mean_interval_width(iv)
        out.update(coverage=cov, interval_width=width, composite=composite_metric(cov, width))
    return out


@dataclass
class EvaluationReport:
    """Per-fold metrics for one model on one dataset plus their summary."""

    model: str
    dataset: str
    config_hash: str
    folds: list[dict] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def add_fold(self, metrics: dict) -> None:
        self.folds.append(dict(metrics))

    def metric_names(self) -> list[str]:
        present = {k for fold in self.folds for k, v in fold.items() if v is not None}
        return [m for m in METRIC_ORDER if m in present]

    def summary(self) -> dict:
        """Mean and sample SD (n-1) across folds for each metric.

        A metric that is undefined on some fold is averaged over the folds
        where it exists; ``count`` records how many.
        """
        out = {}
        for name in self.metric_names():
            vals = np.array([f[name] for f in self.folds if f.get(name) is not None], dtype=np.float64)
            sd = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
            out[name] = {"mean": float(np.mean(vals)), "sd": sd, "count": int(vals.size)}
        return out

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "dataset": self.dataset,
            "config_hash": self.config_hash,
            "folds": self.folds,
            "summary": self.summary(),
            **self.extra,
        }
