"""Subject metadata and raw PPG ingestion, cohort selection, and summaries.

The on-disk layout is a single ``subjects.csv`` plus one text file per
recorded segment (``<subject_id>_<k>.txt``, k in 1..3, one sample per line).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .errors import EmptyInputError, MissingFileError, SchemaError

CSV_COLUMNS = (
    "subject_id",
    "sex",
    "age",
    "height_cm",
    "weight_kg",
    "heart_rate_bpm",
    "bmi",
    "sbp_mmhg",
    "dbp_mmhg",
    "hypertension_stage",
    "diabetes",
    "cerebrovascular",
)

MAX_SEGMENTS_PER_SUBJECT = 3

NON_DIABETIC = 0
DIABETIC = 1

EXCLUDED_COMORBIDITY = "comorbidity_filter"


class Sex(Enum):
    FEMALE = "F"
    MALE = "M"


class HypertensionStage(Enum):
    NORMAL = "normal"
    PREHYPERTENSION = "prehtn"
    STAGE1 = "stage1"
    STAGE2 = "stage2"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Segment:
    """A contiguous stretch of raw PPG samples at a fixed sample rate."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self) -> None:
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise ValueError("segment needs a 1-D array of at least 2 samples")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample rate must be positive")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass
class SubjectRecord:
    subject_id: str
    sex: Sex
    age: float | None
    height_cm: float | None
    weight_kg: float | None
    heart_rate_bpm: float | None
    bmi: float | None
    systolic_bp: float | None
    diastolic_bp: float | None
    hypertension_stage: HypertensionStage
    has_diabetes: bool
    has_cerebrovascular_disease: bool
    segments: list[Segment] = field(default_factory=list)


@dataclass(frozen=True)
class RowIssue:
    """One recoverable problem met while loading the dataset."""

    row: int | None
    subject_id: str | None
    column: str
    message: str


@dataclass
class LoadResult:
    records: list[SubjectRecord]
    issues: list[RowIssue]


def _parse_float(text: str) -> float | None:
    """Parse a numeric cell; blank means missing, garbage raises ValueError."""
    text = text.strip()
    if not text:
        return None
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def _parse_bool(text: str) -> bool:
    text = text.strip()
    if text == "0":
        return False
    if text == "1":
        return True
    raise ValueError(f"expected 0 or 1, got {text!r}")


def _parse_stage(text: str) -> HypertensionStage:
    text = text.strip()
    if not text:
        return HypertensionStage.UNKNOWN
    for stage in HypertensionStage:
        if stage.value == text:
            return stage
    raise ValueError(f"unknown hypertension stage {text!r}")


def _read_segment_file(path: Path, sample_rate_hz: float) -> Segment:
    values: list[float] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise ValueError(f"line {lineno}: not a number: {line!r}") from None
    if len(values) < 2:
        raise ValueError("fewer than 2 samples")
    return Segment(np.asarray(values, dtype=float), sample_rate_hz)


def load_dataset(
    metadata_path: str | Path,
    signals_dir: str | Path,
    sample_rate_hz: float = 1000.0,
) -> LoadResult:
    """Load subjects.csv and every per-subject signal file.

    Rows with unparseable (non-blank) cells become :class:`RowIssue` entries
    and are skipped instead of aborting the whole load. Blank numeric cells
    load as missing values. A blank bmi is derived from height and weight
    when both are present; a bmi that disagrees with weight/(height/100)^2
    by more than 1.0 is flagged but kept.
    """
    metadata_path = Path(metadata_path)
    signals_dir = Path(signals_dir)
    if not metadata_path.is_file():
        raise MissingFileError(f"metadata file not found: {metadata_path}")
    if not signals_dir.is_dir():
        raise MissingFileError(f"signals directory not found: {signals_dir}")

    with metadata_path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames
        if header is None:
            raise SchemaError("metadata file is empty")
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"metadata header missing columns: {', '.join(missing)}")
        rows = list(reader)

    records: list[SubjectRecord] = []
    issues: list[RowIssue] = []
    seen_ids: set[str] = set()
    for rownum, row in enumerate(rows, start=2):  # header is line 1
        subject_id = (row.get("subject_id") or "").strip()
        if not subject_id:
            issues.append(RowIssue(rownum, None, "subject_id", "blank subject_id"))
            continue
        if subject_id in seen_ids:
            issues.append(RowIssue(rownum, subject_id, "subject_id", "duplicate subject_id"))
            continue

        try:
            sex_text = (row.get("sex") or "").strip()
            try:
                sex = Sex(sex_text)
            except ValueError:
                raise ValueError(f"sex must be F or M, got {sex_text!r}") from None
            numeric = {
                name: _parse_float(row.get(name) or "")
                for name in ("age", "height_cm", "weight_kg", "heart_rate_bpm",
                             "bmi", "sbp_mmhg", "dbp_mmhg")
            }
            stage = _parse_stage(row.get("hypertension_stage") or "")
            diabetes = _parse_bool(row.get("diabetes") or "")
            cerebrovascular = _parse_bool(row.get("cerebrovascular") or "")
        except ValueError as exc:
            issues.append(RowIssue(rownum, subject_id, "row", str(exc)))
            continue

        bmi = numeric["bmi"]
        height = numeric["height_cm"]
        weight = numeric["weight_kg"]
        if bmi is None and height is not None and weight is not None and height > 0:
            bmi = weight / (height / 100.0) ** 2
        elif bmi is not None and height is not None and weight is not None and height > 0:
            derived = weight / (height / 100.0) ** 2
            if abs(bmi - derived) > 1.0:
                issues.append(RowIssue(
                    rownum, subject_id, "bmi",
                    f"bmi {bmi:.1f} disagrees with weight/height^2 ({derived:.1f})"))

        record = SubjectRecord(
            subject_id=subject_id,
            sex=sex,
            age=numeric["age"],
            height_cm=height,
            weight_kg=weight,
            heart_rate_bpm=numeric["heart_rate_bpm"],
            bmi=bmi,
            systolic_bp=numeric["sbp_mmhg"],
            diastolic_bp=numeric["dbp_mmhg"],
            hypertension_stage=stage,
            has_diabetes=diabetes,
            has_cerebrovascular_disease=cerebrovascular,
        )

        for k in range(1, MAX_SEGMENTS_PER_SUBJECT + 1):
            seg_path = signals_dir / f"{subject_id}_{k}.txt"
            if not seg_path.is_file():
                continue
            try:
                record.segments.append(_read_segment_file(seg_path, sample_rate_hz))
            except ValueError as exc:
                issues.append(RowIssue(None, subject_id, f"segment_{k}", str(exc)))
        if not record.segments:
            issues.append(RowIssue(None, subject_id, "segments", "no signal files found"))

        seen_ids.add(subject_id)
        records.append(record)

    return LoadResult(records=records, issues=issues)


@dataclass
class Cohort:
    """Two study arms plus the subjects excluded on comorbidity grounds."""

    non_diabetic: list[SubjectRecord]
    diabetic: list[SubjectRecord]
    excluded: list[tuple[str, str]]

    def labeled(self) -> Iterator[tuple[SubjectRecord, int]]:
        for record in self.non_diabetic:
            yield record, NON_DIABETIC
        for record in self.diabetic:
            yield record, DIABETIC

    @property
    def members(self) -> list[SubjectRecord]:
        return self.non_diabetic + self.diabetic


def select_cohort(records: list[SubjectRecord]) -> Cohort:
    """Split subjects into study arms.

    The diabetic arm takes every subject with a diabetes diagnosis,
    comorbidities or not. The non-diabetic arm requires normal blood
    pressure and no diabetes and no cerebrovascular disease. Everyone
    else is excluded with the reason recorded.
    """
    if not records:
        raise EmptyInputError("no subject records to select from")
    cohort = Cohort(non_diabetic=[], diabetic=[], excluded=[])
    for record in records:
        if record.has_diabetes:
            cohort.diabetic.append(record)
        elif (record.hypertension_stage is HypertensionStage.NORMAL
              and not record.has_cerebrovascular_disease):
            cohort.non_diabetic.append(record)
        else:
            cohort.excluded.append((record.subject_id, EXCLUDED_COMORBIDITY))
    return cohort


@dataclass(frozen=True)
class FieldStats:
    mean: float | None
    std: float | None

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std}


@dataclass(frozen=True)
class ClassSummary:
    subjects: int
    males: int
    cycles: int
    age: FieldStats
    height_cm: FieldStats
    weight_kg: FieldStats
    heart_rate_bpm: FieldStats
    bmi: FieldStats

    def to_dict(self) -> dict:
        return {
            "subjects": self.subjects,
            "males": self.males,
            "cycles": self.cycles,
            "age": self.age.to_dict(),
            "height_cm": self.height_cm.to_dict(),
            "weight_kg": self.weight_kg.to_dict(),
            "heart_rate_bpm": self.heart_rate_bpm.to_dict(),
            "bmi": self.bmi.to_dict(),
        }


@dataclass(frozen=True)
class CohortSummary:
    non_diabetic: ClassSummary
    diabetic: ClassSummary
    total: ClassSummary

    def to_dict(self) -> dict:
        return {
            "non_diabetic": self.non_diabetic.to_dict(),
            "diabetic": self.diabetic.to_dict(),
            "total": self.total.to_dict(),
        }


def _field_stats(values: list[float]) -> FieldStats:
    if not values:
        return FieldStats(mean=None, std=None)
    mean = float(np.mean(values))
    if len(values) < 2:
        return FieldStats(mean=mean, std=None)
    return FieldStats(mean=mean, std=float(np.std(values, ddof=1)))


def _class_summary(members: list[SubjectRecord],
                   cycles_per_subject: Mapping[str, int]) -> ClassSummary:
    def collect(attr: str) -> list[float]:
        return [getattr(r, attr) for r in members if getattr(r, attr) is not None]

    return ClassSummary(
        subjects=len(members),
        males=sum(1 for r in members if r.sex is Sex.MALE),
        cycles=sum(cycles_per_subject[r.subject_id] for r in members),
        age=_field_stats(collect("age")),
        height_cm=_field_stats(collect("height_cm")),
        weight_kg=_field_stats(collect("weight_kg")),
        heart_rate_bpm=_field_stats(collect("heart_rate_bpm")),
        bmi=_field_stats(collect("bmi")),
    )


def summarize_cohort(cohort: Cohort,
                     cycles_per_subject: Mapping[str, int]) -> CohortSummary:
    """Per-arm and overall counts with mean and sample (n-1) std per field.

    Every included subject must have a cycle count (possibly 0). Stats on
    fewer than two values report no std; on zero values, no mean either.
    """
    missing = [r.subject_id for r in cohort.members
               if r.subject_id not in cycles_per_subject]
    if missing:
        raise ValueError(f"no cycle count for subjects: {', '.join(missing)}")
    return CohortSummary(
        non_diabetic=_class_summary(cohort.non_diabetic, cycles_per_subject),
        diabetic=_class_summary(cohort.diabetic, cycles_per_subject),
        total=_class_summary(cohort.members, cycles_per_subject),
    )


def metadata_medians(records: list[SubjectRecord]) -> dict[str, float]:
    """Median of each numeric metadata field over the records that have it.

    Used to impute missing fields when assembling feature vectors.
    """
    medians: dict[str, float] = {}
    for attr in ("age", "height_cm", "weight_kg", "heart_rate_bpm", "bmi"):
        values = [getattr(r, attr) for r in records if getattr(r, attr) is not None]
        if values:
            medians[attr] = float(np.median(values))
    return medians
