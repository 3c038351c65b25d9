"""Report serialization and figure rendering.

The report document is written with sorted keys and a fixed layout so the
same run always produces byte-identical JSON. Figures are rendered only
from that document (never from in-memory pipeline state), with the SVG
hash salt and metadata pinned, so regenerating them from a stored
report.json reproduces the files bit for bit.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Sequence

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from ppgscreen.errors import MissingFileError, SchemaError
from ppgscreen.features import FeatureVector, vector_names

log = logging.getLogger(__name__)

REPORT_NAME = "report.json"
SVG_HASH_SALT = "ppgscreen"

MODEL_LABELS = {"logreg": "L1 logistic regression",
                "gbt": "Gradient-boosted trees"}
MODEL_COLORS = {"logreg": "#1f77b4", "gbt": "#d62728"}
CLASS_LABELS = {"0": "Non-diabetic", "1": "Diabetic"}
CLASS_COLORS = {"0": "#1f77b4", "1": "#d62728"}
TOP_IMPORTANCES = 7


def report_bytes(report: dict) -> bytes:
    return (json.dumps(report, sort_keys=True, indent=2) + "\n").encode()


def write_report_json(report: dict, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / REPORT_NAME
    path.write_bytes(report_bytes(report))
    log.info("wrote %s", path)
    return path


def load_report(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"report file not found: {path}")
    try:
        report = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"report {path} is not valid JSON: {exc}") from exc
    if not isinstance(report, dict) or "models" not in report:
        raise SchemaError(f"report {path} lacks a 'models' section")
    return report


def _new_figure(width: float, height: float) -> Figure:
    fig = Figure(figsize=(width, height), dpi=100)
    FigureCanvasSVG(fig)
    return fig


def _save(fig: Figure, path: Path) -> Path:
    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    log.info("wrote %s", path)
    return path


def _fold_auc(fold: dict):
    return fold["metrics"].get("AUC")


def _plot_roc(ax, points, color, label=None, alpha=1.0, width=1.6):
    fpr = [p[0] for p in points]
    tpr = [p[1] for p in points]
    ax.plot(fpr, tpr, color=color, alpha=alpha, linewidth=width, label=label)


def _style_roc_axes(ax, title):
    ax.plot([0, 1], [0, 1], linestyle="--", color="#999999", linewidth=0.9)
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)


def render_fold_rocs(report: dict, out_dir) -> list[Path]:
    """One SVG per fold, each overlaying every model's ROC curve."""
    out = Path(out_dir)
    models = report["models"]
    k = report["fold_plan"]["k"]
    paths = []
    for fold in range(k):
        fig = _new_figure(4.2, 4.0)
        ax = fig.add_subplot(111)
        for kind in sorted(models):
            entry = models[kind]["folds"][fold]
            auc = _fold_auc(entry)
            auc_text = "undefined" if auc is None else f"{auc:.3f}"
            _plot_roc(ax, entry["roc_points"], MODEL_COLORS.get(kind, "#333"),
                      label=f"{MODEL_LABELS.get(kind, kind)} (AUC {auc_text})")
        _style_roc_axes(ax, f"ROC, fold {fold + 1} of {k}")
        fig.tight_layout()
        paths.append(_save(fig, out / f"roc_fold{fold + 1}.svg"))
    return paths


def render_aggregate_roc(report: dict, out_dir) -> Path:
    """All folds of every model on one canvas, mean AUC in the legend."""
    fig = _new_figure(4.6, 4.4)
    ax = fig.add_subplot(111)
    for kind in sorted(report["models"]):
        entry = report["models"][kind]
        agg = entry["aggregate"]["AUC"]
        mean = agg.get("mean")
        std = agg.get("std")
        if mean is None:
            text = "AUC undefined"
        elif std is None:
            text = f"AUC {mean:.3f}"
        else:
            text = f"AUC {mean:.3f} $\\pm$ {std:.3f}"
        color = MODEL_COLORS.get(kind, "#333")
        for i, fold in enumerate(entry["folds"]):
            _plot_roc(ax, fold["roc_points"], color, alpha=0.45, width=1.1,
                      label=f"{MODEL_LABELS.get(kind, kind)} ({text})"
                      if i == 0 else None)
    _style_roc_axes(ax, "ROC across folds")
    fig.tight_layout()
    return _save(fig, Path(out_dir) / "roc_aggregate.svg")


def render_importances(report: dict, out_dir) -> Path | None:
    """Top permutation importances per model as horizontal bars."""
    models = report["models"]
    names = report["feature_names"]
    available = [k for k in sorted(models)
                 if models[k].get("importance_mean") is not None]
    if not available:
        log.info("no importances in report; skipping importance figure")
        return None
    fig = _new_figure(7.2, 3.4)
    for col, kind in enumerate(available, start=1):
        values = models[kind]["importance_mean"]
        order = sorted(range(len(values)), key=lambda i: values[i],
                       reverse=True)[:TOP_IMPORTANCES]
        ax = fig.add_subplot(1, len(available), col)
        ypos = range(len(order))[::-1]
        ax.barh(list(ypos), [values[i] for i in order],
                color=MODEL_COLORS.get(kind, "#333"))
        ax.set_yticks(list(ypos))
        ax.set_yticklabels([names[i] for i in order], fontsize=7)
        ax.set_xlabel("Mean AUC drop when permuted")
        ax.set_title(MODEL_LABELS.get(kind, kind), fontsize=9)
    fig.tight_layout()
    return _save(fig, Path(out_dir) / "importance.svg")


def render_mean_cycle(report: dict, out_dir) -> Path:
    """Class-mean normalized waveforms, peaks aligned at t = 0."""
    entry = report["mean_cycle"]
    fig = _new_figure(5.2, 3.6)
    ax = fig.add_subplot(111)
    for key in sorted(entry["curves"]):
        count = entry["counts"].get(key, 0)
        ax.plot(entry["grid"], entry["curves"][key],
                color=CLASS_COLORS.get(key, "#333"), linewidth=1.8,
                label=f"{CLASS_LABELS.get(key, key)} (n={count} cycles)")
    ax.set_xlabel("Time from systolic peak (s)")
    ax.set_ylabel("Normalized amplitude")
    ax.set_title("Class-mean heartbeat cycle")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return _save(fig, Path(out_dir) / "mean_cycle.svg")


def render_figures(report: dict, out_dir) -> list[Path]:
    """Every figure the report supports, from the document alone."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = render_fold_rocs(report, out)
    paths.append(render_aggregate_roc(report, out))
    importance = render_importances(report, out)
    if importance is not None:
        paths.append(importance)
    paths.append(render_mean_cycle(report, out))
    return paths


def write_feature_csv(vectors: Sequence[FeatureVector], path) -> Path:
    """Dump one row per accepted cycle: id, label, then all 110 features."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["subject_id", "label"] + vector_names()
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for vector in vectors:
            writer.writerow([vector.subject_id, vector.label]
                            + [repr(float(v)) for v in vector.values])
    log.info("wrote %d rows to %s", len(vectors), path)
    return path
