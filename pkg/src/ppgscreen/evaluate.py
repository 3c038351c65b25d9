"""Subject-grouped cross-validation, metrics, ROC, and importance reports.

Folds are assigned per subject, never per cycle, and stratified on the
subject label so both classes appear in every test fold.  Metrics follow
the usual confusion-matrix definitions at a fixed probability threshold;
ratios with a zero denominator are reported as absent (None), not as 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ppgscreen.dsp import PulseCycle
from ppgscreen.errors import (
    EmptyClassError,
    EmptyInputError,
    DegenerateCycleError,
    LengthMismatchError,
    SchemaError,
    SingleClassError,
    TooFewSubjectsError,
)
from ppgscreen.features import FeatureVector
from ppgscreen.models import (
    balanced_weights,
    predict_gbt,
    predict_logreg,
    train_gbt,
    train_logreg,
)

log = logging.getLogger(__name__)

METRIC_NAMES = ("Se", "Sp", "PPV", "Acc", "F1", "AUC")
MEAN_CYCLE_POINTS = 1000


@dataclass(frozen=True)
class FoldPlan:
    """Subject-to-fold assignment; every cycle follows its subject."""

    k: int
    assignments: Dict[str, int]

    def __post_init__(self):
        for sid, fold in self.assignments.items():
            if not 0 <= fold < self.k:
                raise SchemaError(f"fold {fold} for {sid!r} outside 0..{self.k - 1}")

    def subjects_in_fold(self, fold: int) -> Tuple[str, ...]:
        return tuple(sorted(s for s, f in self.assignments.items() if f == fold))

    def to_dict(self) -> dict:
        return {"k": self.k, "assignments": dict(sorted(self.assignments.items()))}


def grouped_stratified_kfold(vectors: Sequence[FeatureVector], k: int = 5,
                             seed: int = 0) -> FoldPlan:
    """Deal each class's shuffled subjects around the folds.

    The oversized folds rotate between classes (the leftover from one class
    starts the deal of the next), keeping per-fold totals within one of
    each other as well as per-class counts.
    """
    labels: Dict[str, int] = {}
    for vec in vectors:
        seen = labels.setdefault(vec.subject_id, vec.label)
        if seen != vec.label:
            raise SchemaError(
                f"subject {vec.subject_id!r} appears with labels {seen} and "
                f"{vec.label}")
    if not labels:
        raise EmptyInputError("no feature vectors to assign")

    rng = np.random.default_rng(seed)
    assignments: Dict[str, int] = {}
    start = 0
    for label in (0, 1):
        subjects = sorted(s for s, lab in labels.items() if lab == label)
        if len(subjects) < k:
            raise TooFewSubjectsError(
                f"class {label} has {len(subjects)} subjects, need >= {k}")
        shuffled = [subjects[i] for i in rng.permutation(len(subjects))]
        base, extra = divmod(len(shuffled), k)
        pos = 0
        for i in range(k):
            fold = (start + i) % k
            size = base + (1 if i < extra else 0)
            for sid in shuffled[pos:pos + size]:
                assignments[sid] = fold
            pos += size
        start = (start + extra) % k
    return FoldPlan(k=k, assignments=assignments)


def confusion_metrics(tp: int, fp: int, tn: int, fn: int) -> Dict[str, Optional[float]]:
    """Se/Sp/PPV/Acc/F1 from confusion counts; zero denominators give None."""
    if min(tp, fp, tn, fn) < 0:
        raise EmptyInputError("confusion counts must be nonnegative")
    total = tp + fp + tn + fn
    if total == 0:
        raise EmptyInputError("confusion counts are all zero")

    def ratio(num, den):
        return num / den if den > 0 else None

    se = ratio(tp, tp + fn)
    sp = ratio(tn, tn + fp)
    ppv = ratio(tp, tp + fp)
    acc = (tp + tn) / total
    if se is None or ppv is None or (ppv + se) == 0:
        f1 = None
    else:
        f1 = 2.0 * ppv * se / (ppv + se)
    return {"Se": se, "Sp": sp, "PPV": ppv, "Acc": acc, "F1": f1}


def roc_auc(scores, labels) -> Tuple[float, Tuple[Tuple[float, float, float], ...]]:
    """ROC sweep over unique score thresholds, descending.

    The returned trapezoidal area equals the pairwise Mann-Whitney
    statistic (ties credited 0.5) up to rounding.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise LengthMismatchError(
            f"scores {scores.shape} and labels {labels.shape} must match")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError(
            f"ROC needs both classes, got {n_pos} positive / {n_neg} negative")

    order = np.argsort(-scores, kind="stable")
    ss = scores[order]
    yy = labels[order]
    points = [(0.0, 0.0, math.inf)]
    tp = fp = 0
    i = 0
    while i < ss.size:
        j = i
        while j < ss.size and ss[j] == ss[i]:
            j += 1
        tp += int((yy[i:j] == 1).sum())
        fp += int((yy[i:j] == 0).sum())
        points.append((fp / n_neg, tp / n_pos, float(ss[i])))
        i = j

    auc = 0.0
    for (x0, y0, _), (x1, y1, _) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return float(auc), tuple(points)


def permutation_importance(model, X, y, repeats: int = 10,
                           seed: int = 0) -> np.ndarray:
    """Per-feature AUC drop when that column is shuffled within the test set."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    predict = _predictor_for(model)
    baseline, _ = roc_auc(predict(X), y)
    rng = np.random.default_rng(seed)
    out = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        drops = np.empty(repeats)
        for r in range(repeats):
            shuffled = X.copy()
            shuffled[:, j] = shuffled[rng.permutation(X.shape[0]), j]
            drops[r], _ = roc_auc(predict(shuffled), y)
        out[j] = baseline - drops.mean()
    return out


def _predictor_for(model):
    from ppgscreen.models import GbtModel, LogRegModel
    if isinstance(model, LogRegModel):
        return lambda X: predict_logreg(model, X)
    if isinstance(model, GbtModel):
        return lambda X: predict_gbt(model, X)
    raise SchemaError(f"cannot score with {type(model).__name__}")


@dataclass(frozen=True)
class EvalConfig:
    threshold: float = 0.5
    importance_repeats: int = 10
    importance_seed: int = 0
    compute_importance: bool = True
    model_params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FoldResult:
    fold: int
    tp: int
    fp: int
    tn: int
    fn: int
    metrics: Dict[str, Optional[float]]
    roc_points: Tuple[Tuple[float, float, float], ...]
    test_subjects: Tuple[str, ...]
    importances: Optional[Tuple[float, ...]] = None

    @property
    def n_test(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return {
            "fold": self.fold,
            "counts": {"tp": self.tp, "fp": self.fp, "tn": self.tn,
                       "fn": self.fn},
            "metrics": dict(self.metrics),
            "roc_points": [list(p) for p in self.roc_points],
            "test_subjects": list(self.test_subjects),
            "importances": (None if self.importances is None
                            else list(self.importances)),
        }


@dataclass(frozen=True)
class EvaluationReport:
    model_kind: str
    threshold: float
    folds: Tuple[FoldResult, ...]
    aggregate: Dict[str, dict]
    importance_mean: Optional[Tuple[float, ...]]

    def to_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "threshold": self.threshold,
            "folds": [f.to_dict() for f in self.folds],
            "aggregate": {k: dict(v) for k, v in self.aggregate.items()},
            "importance_mean": (None if self.importance_mean is None
                                else list(self.importance_mean)),
        }


def aggregate_metrics(folds: Sequence[FoldResult]) -> Dict[str, dict]:
    """Mean and sample (n-1) std of each metric over the folds where it
    is defined."""
    out = {}
    for name in METRIC_NAMES:
        values = [f.metrics.get(name) for f in folds]
        defined = [v for v in values if v is not None]
        entry = {"n": len(defined), "mean": None, "std": None}
        if defined:
            entry["mean"] = float(np.mean(defined))
        if len(defined) >= 2:
            entry["std"] = float(np.std(defined, ddof=1))
        out[name] = entry
    return out


_TRAINERS = {"logreg": (train_logreg, predict_logreg),
             "gbt": (train_gbt, predict_gbt)}


def cross_validate(vectors: Sequence[FeatureVector], plan: FoldPlan,
                   model_kind: str,
                   config: EvalConfig | None = None) -> EvaluationReport:
    """Fit and score model_kind once per fold of the plan.

    Scaler statistics, class weights and the model itself come from the
    training cycles only; the test fold contributes nothing but scores.
    """
    if model_kind not in _TRAINERS:
        raise SchemaError(f"unknown model kind {model_kind!r}")
    config = config or EvalConfig()
    train_fn, predict_fn = _TRAINERS[model_kind]

    vectors = list(vectors)
    if not vectors:
        raise EmptyInputError("no feature vectors to evaluate")
    missing = sorted({v.subject_id for v in vectors} - set(plan.assignments))
    if missing:
        raise SchemaError(f"fold plan does not cover subjects: {missing}")

    X = np.stack([v.values for v in vectors])
    y = np.array([v.label for v in vectors])
    subject = np.array([v.subject_id for v in vectors])
    fold_of = np.array([plan.assignments[s] for s in subject])

    folds = []
    for fold in range(plan.k):
        test_mask = fold_of == fold
        train_subjects = set(subject[~test_mask])
        test_subjects = set(subject[test_mask])
        if train_subjects & test_subjects:
            raise AssertionError(
                f"subject leakage in fold {fold}: "
                f"{sorted(train_subjects & test_subjects)}")

        ytr = y[~test_mask]
        weights = balanced_weights(int((ytr == 0).sum()), int((ytr == 1).sum()))
        model = train_fn(X[~test_mask], ytr, weights, **config.model_params)

        scores = np.atleast_1d(predict_fn(model, X[test_mask]))
        yte = y[test_mask]
        predicted = scores >= config.threshold
        tp = int((predicted & (yte == 1)).sum())
        fp = int((predicted & (yte == 0)).sum())
        tn = int((~predicted & (yte == 0)).sum())
        fn = int((~predicted & (yte == 1)).sum())

        metrics = confusion_metrics(tp, fp, tn, fn)
        auc, roc_points = roc_auc(scores, yte)
        metrics["AUC"] = auc

        importances = None
        if config.compute_importance:
            importances = tuple(
                permutation_importance(model, X[test_mask], yte,
                                       repeats=config.importance_repeats,
                                       seed=config.importance_seed).tolist())

        folds.append(FoldResult(
            fold=fold, tp=tp, fp=fp, tn=tn, fn=fn, metrics=metrics,
            roc_points=roc_points,
            test_subjects=tuple(sorted(test_subjects)),
            importances=importances))
        log.info("%s fold %d: n_test=%d AUC=%.4f", model_kind, fold,
                 folds[-1].n_test, auc)

    importance_mean = None
    if config.compute_importance:
        stacked = np.array([f.importances for f in folds])
        importance_mean = tuple(stacked.mean(axis=0).tolist())

    return EvaluationReport(model_kind=model_kind, threshold=config.threshold,
                            folds=tuple(folds),
                            aggregate=aggregate_metrics(folds),
                            importance_mean=importance_mean)


@dataclass(frozen=True)
class MeanCycleReport:
    grid: np.ndarray
    curves: Dict[int, np.ndarray]
    counts: Dict[int, int]

    def to_dict(self) -> dict:
        return {"grid": self.grid.tolist(),
                "curves": {str(k): v.tolist() for k, v in self.curves.items()},
                "counts": {str(k): v for k, v in self.counts.items()}}


def mean_cycle_report(cycles_by_class: Dict[int, Sequence[PulseCycle]],
                      n_points: int = MEAN_CYCLE_POINTS) -> MeanCycleReport:
    """Min-max normalize every cycle, align peaks at t = 0 on a shared
    grid, and average per class."""
    for label, cycles in cycles_by_class.items():
        if not cycles:
            raise EmptyClassError(f"class {label} has no cycles to average")

    extent = 0.0
    prepared = {}
    for label, cycles in cycles_by_class.items():
        rows = []
        for cycle in cycles:
            x = cycle.samples
            lo, hi = float(x.min()), float(x.max())
            if hi == lo:
                raise DegenerateCycleError("flat cycle cannot be normalized")
            peak_t = int(np.argmax(x)) / cycle.sample_rate_hz
            t = np.arange(x.size) / cycle.sample_rate_hz - peak_t
            rows.append((t, (x - lo) / (hi - lo)))
            extent = max(extent, peak_t, cycle.duration_s - peak_t)
        prepared[label] = rows

    grid = np.linspace(-extent, extent, n_points)
    curves = {}
    counts = {}
    for label, rows in prepared.items():
        acc = np.zeros(n_points)
        for t, v in rows:
            acc += np.interp(grid, t, v)
        curves[label] = acc / len(rows)
        counts[label] = len(rows)
    return MeanCycleReport(grid=grid, curves=curves, counts=counts)
