"""End-to-end orchestration from raw dataset files to evaluation results.

The stages run strictly in order: load, cohort selection, per-segment
filtering, baseline removal, cycle segmentation and validation, feature
extraction, subject-grouped cross-validation of both classifiers, and the
class-mean cycle summary. Everything downstream of the dataset is a pure
function of (files, config), so a rerun with the same inputs reproduces
the same report.
"""

from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from ppgscreen import config as config_mod
from ppgscreen.config import PipelineConfig
from ppgscreen.dataset import (
    Cohort,
    CohortSummary,
    RowIssue,
    load_dataset,
    metadata_medians,
    select_cohort,
    summarize_cohort,
)
from ppgscreen.dsp import candidate_cycles, filter_segment, fsw_baseline, validate_cycle
from ppgscreen.errors import NoValleysError, TooShortError
from ppgscreen.evaluate import (
    EvalConfig,
    EvaluationReport,
    FoldPlan,
    MeanCycleReport,
    cross_validate,
    grouped_stratified_kfold,
    mean_cycle_report,
)
from ppgscreen.features import FeatureVector, assemble_vector, compute_features, vector_names

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def dataset_fingerprint(metadata_path, signals_dir) -> str:
    """SHA-256 over the metadata bytes and every signal file, in sorted
    order, so reports can state exactly which dataset they ran on."""
    digest = hashlib.sha256()
    digest.update(Path(metadata_path).read_bytes())
    for path in sorted(Path(signals_dir).glob("*.txt")):
        digest.update(path.name.encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


@dataclass(frozen=True)
class SegmentationOutcome:
    """Cycles kept per subject plus why the rest were dropped."""

    cycles_per_subject: Dict[str, int]
    drop_reasons: Dict[str, int]
    segment_failures: Dict[str, int]


@dataclass(frozen=True)
class RunResult:
    config: PipelineConfig
    fingerprint: str
    load_issues: Tuple[RowIssue, ...]
    excluded_by_config: Tuple[str, ...]
    excluded_comorbidity: Tuple[Tuple[str, str], ...]
    summary: CohortSummary
    segmentation: SegmentationOutcome
    fold_plan: FoldPlan
    evaluations: Dict[str, EvaluationReport]
    mean_cycle: MeanCycleReport
    runtime_s: float

    @property
    def total_cycles(self) -> int:
        return sum(self.segmentation.cycles_per_subject.values())

    @property
    def subjects_with_cycles(self) -> int:
        return sum(1 for n in self.segmentation.cycles_per_subject.values()
                   if n > 0)

    def to_report(self) -> dict:
        """The JSON-ready report document.

        Deliberately excludes the runtime: the document must hash
        identically across reruns on the same inputs.
        """
        return {
            "schema_version": SCHEMA_VERSION,
            "config": config_mod.to_dict(self.config),
            "dataset": {
                "fingerprint": self.fingerprint,
                "load_issues": [asdict(i) for i in self.load_issues],
                "excluded_by_config": list(self.excluded_by_config),
                "excluded_comorbidity": [list(e) for e in
                                         self.excluded_comorbidity],
                "summary": self.summary.to_dict(),
                "cycles_per_subject": dict(sorted(
                    self.segmentation.cycles_per_subject.items())),
                "drop_reasons": dict(sorted(
                    self.segmentation.drop_reasons.items())),
                "segment_failures": dict(sorted(
                    self.segmentation.segment_failures.items())),
                "total_accepted_cycles": self.total_cycles,
                "subjects_with_cycles": self.subjects_with_cycles,
            },
            "feature_names": vector_names(),
            "fold_plan": self.fold_plan.to_dict(),
            "models": {kind: report.to_dict()
                       for kind, report in sorted(self.evaluations.items())},
            "mean_cycle": self.mean_cycle.to_dict(),
        }


def _segment_subjects(cohort: Cohort, config: PipelineConfig):
    """Filter, baseline-correct, cut, and validate every segment.

    Returns accepted cycles tagged by subject, plus the bookkeeping that
    goes into the report.
    """
    filter_spec = config.filter.to_spec(config.sample_rate_hz)
    rules = config.cycle.to_rules()
    cycles_by_subject: Dict[str, list] = {}
    drop_reasons: Dict[str, int] = {}
    segment_failures: Dict[str, int] = {}

    for record, _label in cohort.labeled():
        accepted = cycles_by_subject.setdefault(record.subject_id, [])
        for segment in record.segments:
            try:
                filtered = filter_segment(segment, filter_spec)
                fit = fsw_baseline(filtered, window_s=config.fsw.window_s,
                                   min_gap_s=config.fsw.min_gap_s)
            except (TooShortError, NoValleysError) as exc:
                name = type(exc).__name__
                segment_failures[name] = segment_failures.get(name, 0) + 1
                log.warning("skipping a segment of %s: %s",
                            record.subject_id, exc)
                continue
            for cycle in candidate_cycles(filtered, fit,
                                          subject_id=record.subject_id):
                reason = validate_cycle(cycle, rules)
                if reason is None:
                    accepted.append(cycle)
                else:
                    drop_reasons[reason] = drop_reasons.get(reason, 0) + 1
    return cycles_by_subject, drop_reasons, segment_failures


@dataclass(frozen=True)
class FeatureStage:
    """Everything up to and including feature extraction."""

    cohort: Cohort
    load_issues: Tuple[RowIssue, ...]
    excluded_by_config: Tuple[str, ...]
    summary: CohortSummary
    segmentation: SegmentationOutcome
    vectors: Tuple[FeatureVector, ...]
    cycles_by_class: Dict[int, list]


def collect_features(config: PipelineConfig) -> FeatureStage:
    """Run load, selection, segmentation, and feature extraction."""
    loaded = load_dataset(config.paths.metadata, config.paths.signals,
                          sample_rate_hz=config.sample_rate_hz)
    for issue in loaded.issues:
        log.warning("load issue in row %s: %s", issue.row, issue.message)

    excluded_ids = set(config.exclude_ids)
    records = [r for r in loaded.records if r.subject_id not in excluded_ids]
    dropped_ids = tuple(sorted(
        r.subject_id for r in loaded.records if r.subject_id in excluded_ids))
    if dropped_ids:
        log.info("excluded by config: %s", ", ".join(dropped_ids))

    cohort = select_cohort(records)
    log.info("cohort: %d non-diabetic, %d diabetic, %d excluded",
             len(cohort.non_diabetic), len(cohort.diabetic),
             len(cohort.excluded))

    cycles_by_subject, drop_reasons, segment_failures = _segment_subjects(
        cohort, config)
    cycles_per_subject = {sid: len(cycles)
                          for sid, cycles in cycles_by_subject.items()}
    summary = summarize_cohort(cohort, cycles_per_subject)

    medians = metadata_medians(cohort.members)
    label_of = {record.subject_id: label for record, label in cohort.labeled()}
    vectors: list[FeatureVector] = []
    cycles_by_class: Dict[int, list] = {0: [], 1: []}
    record_of = {record.subject_id: record for record in cohort.members}
    for sid in sorted(cycles_by_subject):
        for cycle in cycles_by_subject[sid]:
            ppg = compute_features(cycle)
            vectors.append(assemble_vector(record_of[sid], ppg,
                                           fallbacks=medians))
            cycles_by_class[label_of[sid]].append(cycle)
    log.info("extracted %d feature vectors from %d subjects",
             len(vectors), sum(1 for v in cycles_per_subject.values() if v))

    return FeatureStage(
        cohort=cohort,
        load_issues=tuple(loaded.issues),
        excluded_by_config=dropped_ids,
        summary=summary,
        segmentation=SegmentationOutcome(
            cycles_per_subject=cycles_per_subject,
            drop_reasons=drop_reasons,
            segment_failures=segment_failures),
        vectors=tuple(vectors),
        cycles_by_class=cycles_by_class,
    )


def run_pipeline(config: PipelineConfig) -> RunResult:
    started = time.perf_counter()
    stage = collect_features(config)
    vectors = list(stage.vectors)

    plan = grouped_stratified_kfold(vectors, k=config.eval.k,
                                    seed=config.seed)
    evaluations = {}
    for kind, params in (("logreg", config.model.logreg.train_kwargs()),
                         ("gbt", config.model.gbt.train_kwargs())):
        eval_config = EvalConfig(
            threshold=config.eval.threshold,
            importance_repeats=config.eval.importance_repeats,
            importance_seed=config.seed,
            compute_importance=config.eval.compute_importance,
            model_params=params)
        evaluations[kind] = cross_validate(vectors, plan, kind, eval_config)

    mean_cycle = mean_cycle_report(stage.cycles_by_class)

    return RunResult(
        config=config,
        fingerprint=dataset_fingerprint(config.paths.metadata,
                                        config.paths.signals),
        load_issues=stage.load_issues,
        excluded_by_config=stage.excluded_by_config,
        excluded_comorbidity=tuple(stage.cohort.excluded),
        summary=stage.summary,
        segmentation=stage.segmentation,
        fold_plan=plan,
        evaluations=evaluations,
        mean_cycle=mean_cycle,
        runtime_s=time.perf_counter() - started,
    )
