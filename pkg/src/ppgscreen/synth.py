"""Synthetic PPG cohort generator with construction-based ground truth.

Each beat is a steep rising edge (Gaussian CDF), a wide falling CDF whose
near-linear runoff spans the whole diastole, and a Gaussian dicrotic wave
riding the decay. The runoff keeps a strong downward slope all the way to
the foot, so the inter-beat valley is a sharp V: its location is stable
under noise, and the dicrotic notch sits hundreds of amplitude units above
it, far outside the valley detector's merge tolerances. The class label is
carried by the dicrotic amplitude (and an age shift), so trained models
have real signal to find.

Ground-truth valley and peak times come from the generator's own phase
geometry, refined by direct argmin and argmax scans of the clean signal;
they never pass through the detection code under test. Only the segment
edge rules (whether the first or last sample counts as a valley) and the
per-cycle validation rules are re-stated here, narrowly, to predict
accepted-cycle counts.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from ppgscreen.dataset import CSV_COLUMNS
from ppgscreen.errors import InvalidSpecError

log = logging.getLogger(__name__)

# Detection-rule constants mirrored for count prediction (see expected
# cycle logic below): valley merge gap and the cycle validation rules.
VALLEY_WINDOW_S = 0.5
VALLEY_MIN_GAP_S = 0.4
CYCLE_MIN_S = 0.4
CYCLE_MAX_S = 1.5
PEAK_PROMINENCE_FRAC = 0.5
MAX_PEAK_POS_FRAC = 0.6

# Per-subject shape draws. The box was chosen so that, for any heart rate
# in HR_SAFE_BPM, the notch-to-foot phase gap stays well under the merge
# window, the notch always sits far above the foot, and the foot keeps a
# steep V profile; generate() re-checks those margins for every drawn
# subject and refuses to emit a cohort that would break its own truth.
SHAPE_RANGES = {
    "rise_center": (0.050, 0.075),
    "rise_width": (0.030, 0.038),
    "fall_center": (0.60, 0.64),
    "fall_width": (0.26, 0.30),
    "dic_center": (0.38, 0.44),
    "dic_width": (0.045, 0.060),
}
DIC_AMP_CLIP = (0.02, 0.085)
START_PHASE_RANGE = (0.55, 0.80)
HR_SAFE_BPM = (40.0, 150.0)
MAX_NOTCH_GAP_S = 0.385
MIN_NOTCH_DEPTH = 0.05
FOOT_PHASE_RANGE = (0.90, 1.10)
PEAK_PHASE_RANGE = (0.05, 0.30)


@dataclass(frozen=True)
class PulseShape:
    """One beat in phase units (one period = 1).

    The waveform is rise CDF - fall CDF + dicrotic Gaussian; the wide fall
    keeps the diastolic slope alive all the way to the next onset.
    """

    rise_center: float
    rise_width: float
    fall_center: float
    fall_width: float
    dic_center: float
    dic_width: float
    dic_amp: float

    def beat(self, u):
        u = np.asarray(u, dtype=np.float64)
        out = ndtr((u - self.rise_center) / self.rise_width)
        out = out - ndtr((u - self.fall_center) / self.fall_width)
        out = out + self.dic_amp * np.exp(
            -((u - self.dic_center) ** 2) / (2.0 * self.dic_width**2))
        return out

    def value(self, phase):
        h = np.asarray(phase, dtype=np.float64) % 1.0
        out = np.zeros_like(h)
        for shift in (-2.0, -1.0, 0.0, 1.0, 2.0):
            out = out + self.beat(h + shift)
        return out


@dataclass(frozen=True)
class ShapeGeometry:
    """Landmark phases of one periodic pulse shape."""

    foot_phase: float       # in [0.9, 1.1); unwrapped past 1.0 when needed
    peak_phase: float
    notch_phase: float | None
    notch_depth: float      # notch minus foot value, shape units
    n_minima: int


def _shape_geometry(shape: PulseShape) -> ShapeGeometry:
    grid = np.linspace(0.0, 1.0, 8001)[:-1]
    v = shape.value(grid)
    left = np.roll(v, 1)
    right = np.roll(v, -1)
    min_idx = np.flatnonzero((v < left) & (v <= right))
    i_floor = min_idx[np.argmin(v[min_idx])]
    foot = float(grid[i_floor])
    if foot < 0.5:
        foot += 1.0
    peak = float(grid[np.argmax(v)])
    dips = [i for i in min_idx if i != i_floor]
    notch_phase = None
    notch_depth = math.inf
    if dips:
        i_notch = dips[int(np.argmin(v[dips]))]
        notch_phase = float(grid[i_notch])
        notch_depth = float(v[i_notch] - v[i_floor])
    return ShapeGeometry(
        foot_phase=foot, peak_phase=peak, notch_phase=notch_phase,
        notch_depth=notch_depth, n_minima=len(min_idx))


def _check_geometry(geo: ShapeGeometry, period_s: float) -> None:
    """Refuse shapes whose truth the valley detector could not reproduce."""
    lo, hi = FOOT_PHASE_RANGE
    if geo.n_minima > 2 or not lo <= geo.foot_phase <= hi:
        raise InvalidSpecError(
            f"pulse shape geometry out of range (foot at {geo.foot_phase:.3f}, "
            f"{geo.n_minima} minima)")
    if not PEAK_PHASE_RANGE[0] <= geo.peak_phase <= PEAK_PHASE_RANGE[1]:
        raise InvalidSpecError(
            f"tallest point at phase {geo.peak_phase:.3f}; the systolic "
            "peak must dominate the dicrotic wave")
    if geo.notch_phase is not None:
        gap_s = (geo.notch_phase + 1.0 - geo.foot_phase) * period_s
        if gap_s > MAX_NOTCH_GAP_S or geo.notch_depth < MIN_NOTCH_DEPTH:
            raise InvalidSpecError(
                f"notch too close to the merge window (gap {gap_s:.3f} s, "
                f"depth {geo.notch_depth:.3f})")


@dataclass(frozen=True)
class SynthSpec:
    n_per_class: int = 10
    segments_per_subject: int = 3
    segment_s: float = 2.1
    sample_rate_hz: float = 1000.0
    hr_range_bpm: tuple = (72.0, 90.0)
    amplitude: float = 1000.0
    offset: float = 2000.0
    noise_frac: float = 0.0
    drift_frac_per_s: float = 0.0
    dic_amp_by_class: tuple = (0.065, 0.040)
    dic_amp_jitter: float = 0.008
    seed: int = 0

    def __post_init__(self):
        if self.n_per_class < 1 or self.segments_per_subject < 1:
            raise InvalidSpecError("need at least one subject and segment")
        if self.segment_s <= 0 or self.sample_rate_hz <= 0:
            raise InvalidSpecError("segment_s and sample_rate_hz must be > 0")
        lo, hi = self.hr_range_bpm
        if not (HR_SAFE_BPM[0] <= lo <= hi <= HR_SAFE_BPM[1]):
            raise InvalidSpecError(f"bad heart-rate range {self.hr_range_bpm}")
        if self.amplitude <= 0:
            raise InvalidSpecError("amplitude must be > 0")
        if self.noise_frac < 0 or self.dic_amp_jitter < 0:
            raise InvalidSpecError("noise_frac and jitter must be >= 0")
        if abs(self.drift_frac_per_s) > 0.05:
            raise InvalidSpecError(
                "drift beyond 5% of amplitude per second would distort "
                "the valley geometry the truth relies on")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hr_range_bpm"] = list(self.hr_range_bpm)
        out["dic_amp_by_class"] = list(self.dic_amp_by_class)
        return out


@dataclass(frozen=True)
class SegmentTruth:
    """Ground truth for one generated segment, all times in seconds."""

    start_phase: float
    valleys_s: tuple
    peaks_s: tuple
    end_valley_s: float | None
    expected_cycles: int

    def to_dict(self) -> dict:
        return {"start_phase": self.start_phase,
                "valleys_s": list(self.valleys_s),
                "peaks_s": list(self.peaks_s),
                "end_valley_s": self.end_valley_s,
                "expected_cycles": self.expected_cycles}


@dataclass(frozen=True)
class SynthSubject:
    subject_id: str
    label: int
    row: dict
    shape: PulseShape
    period_s: float
    clean: tuple
    noisy: tuple
    truth: tuple


@dataclass(frozen=True)
class SynthCohort:
    spec: SynthSpec
    subjects: tuple

    def truth_dict(self) -> dict:
        subjects = {}
        for sub in self.subjects:
            subjects[sub.subject_id] = {
                "label": sub.label,
                "period_s": sub.period_s,
                "heart_rate_bpm": float(sub.row["heart_rate_bpm"]),
                "shape": asdict(sub.shape),
                "segments": {str(i + 1): t.to_dict()
                             for i, t in enumerate(sub.truth)},
            }
        return {"spec": self.spec.to_dict(), "subjects": subjects}


def _refine(samples: np.ndarray, guess: int, half: int, mode) -> int:
    lo = max(0, guess - half)
    hi = min(samples.size, guess + half + 1)
    pick = np.argmin if mode == "min" else np.argmax
    return lo + int(pick(samples[lo:hi]))


def _linear_detrend(piece: np.ndarray) -> np.ndarray:
    ramp = np.linspace(piece[0], piece[-1], piece.size)
    return piece - ramp


def _cycle_passes(piece: np.ndarray, fs: float) -> bool:
    """The documented validation rules applied to a baseline-corrected
    candidate, re-expressed here so expected counts stay independent of
    the detection code."""
    duration = (piece.size - 1) / fs
    if not CYCLE_MIN_S <= duration <= CYCLE_MAX_S:
        return False
    corrected = _linear_detrend(piece)
    peak = float(corrected.max())
    if peak <= 0.0:
        return False
    k = int(np.argmax(corrected))
    span = float(corrected.max() - corrected.min())
    prominence = peak - max(float(corrected[:k + 1].min()),
                            float(corrected[k:].min()))
    if prominence < PEAK_PROMINENCE_FRAC * span:
        return False
    if k > MAX_PEAK_POS_FRAC * (piece.size - 1):
        return False
    return True


def _end_sample_is_valley(clean: np.ndarray, fs: float) -> bool:
    half = max(1, int(round(VALLEY_WINDOW_S * fs / 2)))
    window = clean[max(0, clean.size - 1 - half):]
    if int(np.argmin(window)) != window.size - 1:
        return False
    return bool((window > window[-1]).any())


def _start_sample_is_valley(clean: np.ndarray, fs: float) -> bool:
    half = max(1, int(round(VALLEY_WINDOW_S * fs / 2)))
    window = clean[:half + 1]
    if int(np.argmin(window)) != 0:
        return False
    return bool((window > window[0]).any())


def _segment_truth(clean: np.ndarray, fs: float, period_s: float,
                   geo: ShapeGeometry, u0: float) -> SegmentTruth:
    n = clean.size
    duration = (n - 1) / fs
    half = max(3, int(round(0.12 * period_s * fs)))

    valleys = []
    m = 0
    while True:
        t = (m + geo.foot_phase - u0) * period_s
        if t >= duration:
            break
        if t >= 0.0:
            valleys.append(_refine(clean, int(round(t * fs)), half, "min"))
        m += 1
    peaks = []
    m = 0
    while True:
        t = (m + geo.peak_phase - u0) * period_s
        if t > duration:
            break
        if t >= 0.0:
            peaks.append(_refine(clean, int(round(t * fs)), half, "max"))
        m += 1

    if _start_sample_is_valley(clean, fs):
        if not valleys:
            valleys.append(0)
        elif valleys[0] / fs >= VALLEY_MIN_GAP_S:
            valleys.insert(0, 0)
        elif not clean[valleys[0]] < clean[0]:
            # the detector would keep sample 0 and drop the shallower
            # interior minimum right after it
            valleys[0] = 0

    boundaries = list(valleys)
    end_valley = None
    if _end_sample_is_valley(clean, fs):
        gap = (n - 1 - (valleys[-1] if valleys else 0)) / fs
        if gap >= VALLEY_MIN_GAP_S:
            end_valley = n - 1
            boundaries.append(end_valley)

    expected = sum(
        1 for a, b in zip(boundaries, boundaries[1:])
        if _cycle_passes(clean[a:b + 1], fs))

    return SegmentTruth(
        start_phase=u0,
        valleys_s=tuple(v / fs for v in valleys),
        peaks_s=tuple(p / fs for p in peaks),
        end_valley_s=None if end_valley is None else end_valley / fs,
        expected_cycles=expected)


_STAGES_DIABETIC = ("normal", "prehtn", "stage1")


def _subject_row(sid: str, label: int, hr: float, rng) -> dict:
    sex = "M" if rng.random() < 0.5 else "F"
    if label == 0:
        age = float(np.clip(round(rng.normal(47.0, 9.0)), 25, 70))
    else:
        age = float(np.clip(round(rng.normal(57.0, 9.0)), 30, 79))
    height = round(float(rng.normal(176.0 if sex == "M" else 163.0, 6.5)), 1)
    weight = round(float(rng.normal(80.0 if sex == "M" else 66.0, 9.0)), 1)
    bmi = round(weight / (height / 100.0) ** 2, 1)
    if label == 0:
        stage = "normal"
        sbp = int(rng.integers(100, 119))
        dbp = int(rng.integers(62, 79))
    else:
        stage = _STAGES_DIABETIC[int(rng.integers(0, len(_STAGES_DIABETIC)))]
        base = {"normal": (104, 118), "prehtn": (121, 138),
                "stage1": (141, 158)}[stage]
        sbp = int(rng.integers(*base))
        dbp = int(rng.integers(66, 92))
    return {
        "subject_id": sid, "sex": sex, "age": age, "height_cm": height,
        "weight_kg": weight, "heart_rate_bpm": hr, "bmi": bmi,
        "sbp_mmhg": sbp, "dbp_mmhg": dbp, "hypertension_stage": stage,
        "diabetes": label, "cerebrovascular": 0,
    }


def _draw_shape(rng, dic_amp: float) -> PulseShape:
    params = {name: float(rng.uniform(lo, hi))
              for name, (lo, hi) in SHAPE_RANGES.items()}
    return PulseShape(dic_amp=dic_amp, **params)


def generate(spec: SynthSpec) -> SynthCohort:
    rng = np.random.default_rng(spec.seed)
    fs = spec.sample_rate_hz
    n = int(round(spec.segment_s * fs))
    t = np.arange(n) / fs

    subjects = []
    for label in (0, 1):
        for i in range(spec.n_per_class):
            sid = f"{'n' if label == 0 else 'd'}{i:03d}"
            hr = round(float(rng.uniform(*spec.hr_range_bpm)), 1)
            period = 60.0 / hr
            dic_amp = float(np.clip(
                spec.dic_amp_by_class[label]
                + rng.normal(0.0, spec.dic_amp_jitter), *DIC_AMP_CLIP))
            shape = _draw_shape(rng, dic_amp)
            geo = _shape_geometry(shape)
            _check_geometry(geo, period)
            row = _subject_row(sid, label, hr, rng)

            clean_segments = []
            noisy_segments = []
            truths = []
            for _ in range(spec.segments_per_subject):
                u0 = float(rng.uniform(*START_PHASE_RANGE))
                phase = t / period + u0
                clean = (spec.offset + spec.amplitude * shape.value(phase)
                         + spec.drift_frac_per_s * spec.amplitude * t)
                noise = (spec.noise_frac * spec.amplitude
                         * rng.standard_normal(n))
                truths.append(_segment_truth(clean, fs, period, geo, u0))
                clean_segments.append(tuple(clean.tolist()))
                noisy_segments.append(tuple((clean + noise).tolist()))

            subjects.append(SynthSubject(
                subject_id=sid, label=label, row=row, shape=shape,
                period_s=period, clean=tuple(clean_segments),
                noisy=tuple(noisy_segments), truth=tuple(truths)))
    return SynthCohort(spec=spec, subjects=tuple(subjects))


def write_dataset(cohort: SynthCohort, out_dir) -> dict:
    """Emit subjects.csv, signals/<id>_<k>.txt, and truth.json."""
    out = Path(out_dir)
    signals = out / "signals"
    signals.mkdir(parents=True, exist_ok=True)

    meta_path = out / "subjects.csv"
    with open(meta_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for sub in cohort.subjects:
            row = sub.row
            writer.writerow([
                row["subject_id"], row["sex"], f"{row['age']:.0f}",
                f"{row['height_cm']:.1f}", f"{row['weight_kg']:.1f}",
                f"{row['heart_rate_bpm']:.1f}", f"{row['bmi']:.1f}",
                str(row["sbp_mmhg"]), str(row["dbp_mmhg"]),
                row["hypertension_stage"], str(row["diabetes"]),
                str(row["cerebrovascular"]),
            ])

    for sub in cohort.subjects:
        for k, samples in enumerate(sub.noisy, start=1):
            path = signals / f"{sub.subject_id}_{k}.txt"
            path.write_text(
                "".join(f"{v:.4f}\n" for v in samples), encoding="utf-8")

    truth_path = out / "truth.json"
    truth_path.write_text(
        json.dumps(cohort.truth_dict(), sort_keys=True, indent=1),
        encoding="utf-8")
    log.info("wrote %d subjects to %s", len(cohort.subjects), out)
    return {"metadata": meta_path, "signals": signals, "truth": truth_path}


def generate_dataset(spec: SynthSpec, out_dir) -> dict:
    return write_dataset(generate(spec), out_dir)
