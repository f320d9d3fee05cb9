"""SVG figures: held-out predictions with interval bands and AL learning curves."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .models.registry import MODEL_LABELS  # noqa: E402

# fixed salt and no date stamp keep the SVG bytes reproducible
SVG_RC = {"svg.hashsalt": "creepuq", "svg.fonttype": "path"}
SVG_METADATA = {"Date": None, "Creator": None}


def _save(fig, path: Path) -> Path:
    with plt.rc_context(SVG_RC):
        fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)
    return path


def gather_predictions(report: dict) -> dict:
    """Held-out predictions of all successful folds, ordered by dataset index."""
    parts = [f["predictions"] for f in report.get("fold_details", []) if f.get("error") is None]
    if not parts:
        raise ValueError(f"report for {report.get('model')} holds no predictions")
    out = {key: np.concatenate([p[key] for p in parts]) for key in ("index", "y", "mean")}
    if all("std" in p for p in parts):
        for key in ("std", "lower", "upper"):
            out[key] = np.concatenate([p[key] for p in parts])
    order = np.argsort(out["index"], kind="stable")
    return {k: v[order] for k, v in out.items()}


def prediction_figure(report: dict):
    """Observed vs predicted log10 life per sample, with the interval band when present."""
    data = gather_predictions(report)
    x = np.arange(data["index"].size)
    fig, ax = plt.subplots(figsize=(8, 4))
    if "lower" in data:
        ax.fill_between(x, data["lower"], data["upper"], color="tab:green", alpha=0.3, linewidth=0,
                        label="prediction interval")
    ax.plot(x, data["mean"], color="tab:blue", linewidth=1.0, label="predicted")
    ax.scatter(x, data["y"], s=6, color="black", label="observed", zorder=3)
    ax.set_xlabel("sample (dataset order)")
    ax.set_ylabel(r"$\log_{10}$ rupture life (h)")
    ax.set_title(MODEL_LABELS.get(report["model"], report["model"]))
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    return fig


def learning_curve_figure(traces):
    """Mean test R² against labeled count per (model, strategy), min-max band over seeds."""
    groups = defaultdict(list)
    for t in traces:
        groups[(t.model, t.strategy)].append(t)
    fig, ax = plt.subplots(figsize=(6, 4))
    for (model, strategy), group in sorted(groups.items()):
        counts = sorted(set.intersection(*(set(t.labeled_counts().tolist()) for t in group)))
        r2 = np.array([[dict(zip(t.labeled_counts().tolist(), t.r2()))[c] for c in counts] for t in group])
        label = f"{MODEL_LABELS.get(model, model)} / {strategy}"
        line, = ax.plot(counts, r2.mean(axis=0), marker="o", markersize=3, label=label)
        ax.fill_between(counts, r2.min(axis=0), r2.max(axis=0), color=line.get_color(), alpha=0.2, linewidth=0)
    ax.set_xlabel("labeled samples")
    ax.set_ylabel(r"test $R^2$")
    ax.legend(loc="lower right", fontsize="small")
    fig.tight_layout()
    return fig


def emit_plots(reports: list[dict], traces: list, out_dir) -> list[Path]:
    """Write ``predictions_<model>.svg`` per report and ``learning_curves.svg``."""
    if not reports and not traces:
        raise ValueError("nothing to plot: no reports and no traces")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for report in reports:
        paths.append(_save(prediction_figure(report), out / f"predictions_{report['model']}.svg"))
    if traces:
        paths.append(_save(learning_curve_figure(traces), out / "learning_curves.svg"))
    return paths
