"""The per-cycle morphological feature catalog and vector assembly.

The catalog is an ordered list of exactly 104 feature definitions computed
from one baseline-corrected cycle and its two derivatives. FEATURES.md in
the repository root documents every entry in order; a test keeps the two
in sync. The full classifier input is 110 values: the 104 waveform
features followed by six subject metadata fields (sex, age, height,
weight, heart rate, bmi). Blood pressure is deliberately never a feature.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .dataset import Sex, SubjectRecord
from .dsp import PulseCycle
from .errors import (
    DegenerateCycleError,
    LengthMismatchError,
    MissingMetadataError,
    NonFiniteError,
)
from .fiducials import FiducialSet, derivative, detect_fiducials

log = logging.getLogger(__name__)

WIDTH_LEVELS = (10, 25, 33, 50, 66, 75, 90)

METADATA_FIELDS = ("sex", "age", "height_cm", "weight_kg", "heart_rate_bpm", "bmi")

N_PPG_FEATURES = 104
N_FEATURES = N_PPG_FEATURES + len(METADATA_FIELDS)


@dataclass(frozen=True)
class FeatureDef:
    """One catalog entry.

    ``scale_exp`` is the power of c the value picks up when the cycle
    amplitude is scaled by c; ``time_valued`` marks features measured in
    seconds (used by the grid-convergence checks).
    """

    name: str
    formula: str
    params: tuple
    unit: str
    scale_exp: int
    time_valued: bool


class _CycleContext:
    """Everything the formulas need, computed once per cycle."""

    def __init__(self, cycle: PulseCycle, fiducials: FiducialSet):
        self.samples = cycle.samples
        self.fs = cycle.sample_rate_hz
        self.dt = 1.0 / self.fs
        self.n = self.samples.size
        self.duration = cycle.duration_s
        self.fid = fiducials
        self.peak_index = int(round(fiducials.peak_t * self.fs))
        self.d1 = derivative(self.samples, self.fs)
        self.d2 = derivative(self.d1, self.fs)
        self._crossings: dict[int, tuple[float, float]] = {}

    def crossings(self, level_pct: int) -> tuple[float, float]:
        """(rise time, fall time) where the cycle crosses level_pct% of the
        peak value: the last upward crossing before the peak and the first
        downward crossing after it, linearly interpolated. Missing
        crossings clamp to the cycle ends."""
        if level_pct in self._crossings:
            return self._crossings[level_pct]
        level = level_pct / 100.0 * self.fid.peak_v
        s, p = self.samples, self.peak_index

        t_up = 0.0
        for i in range(p, -1, -1):
            if s[i] < level:
                t_up = (i + (level - s[i]) / (s[i + 1] - s[i])) * self.dt
                break

        t_down = self.duration
        for i in range(p + 1, self.n):
            if s[i] < level:
                t_down = (i - 1 + (s[i - 1] - level) / (s[i - 1] - s[i])) * self.dt
                break

        self._crossings[level_pct] = (t_up, t_down)
        return t_up, t_down


def _safe_div(a: float, b: float) -> float:
    return a / b if b != 0.0 else 0.0


def _trapezoid(values: np.ndarray, dt: float) -> float:
    if values.size < 2:
        return 0.0
    return float((values[0] / 2 + values[1:-1].sum() + values[-1] / 2) * dt)


def _moment_ratio(values: np.ndarray, order: int) -> float:
    centered = values - values.mean()
    m2 = float(np.mean(centered ** 2))
    if m2 == 0.0:
        return 0.0
    return float(np.mean(centered ** order)) / m2 ** (order / 2)


def _notch(ctx: _CycleContext, attr: str) -> float:
    value = getattr(ctx.fid, attr)
    return 0.0 if value is None else value


_FORMULAS: dict[str, Callable] = {
    # named intensity and slope features
    "aid": lambda c: c.fid.peak_v - c.fid.onset_v,
    "did": lambda c: c.fid.peak_v - c.fid.end_v,
    "asc_slope": lambda c: _safe_div(c.fid.peak_v - c.fid.onset_v, c.fid.peak_t),
    "perfusion": lambda c: _safe_div(c.fid.peak_v, float(c.samples.mean())),
    "d1_peak": lambda c: c.fid.d1_max_v,
    "d1_asc_slope": lambda c: _safe_div(c.fid.d1_max_v - c.d1[0], c.fid.d1_max_t),
    # cycle geometry and sample statistics
    "duration": lambda c: c.duration,
    "hr": lambda c: _safe_div(60.0, c.duration),
    "peak_t": lambda c: c.fid.peak_t,
    "peak_pos_frac": lambda c: _safe_div(c.fid.peak_t, c.duration),
    "diastolic_time": lambda c: c.duration - c.fid.peak_t,
    "sys_dia_time_ratio": lambda c: _safe_div(c.fid.peak_t, c.duration - c.fid.peak_t),
    "onset_v": lambda c: c.fid.onset_v,
    "end_v": lambda c: c.fid.end_v,
    "onset_end_diff": lambda c: c.fid.end_v - c.fid.onset_v,
    "diastolic_slope": lambda c: _safe_div(c.fid.end_v - c.fid.peak_v,
                                           c.duration - c.fid.peak_t),
    "mean_v": lambda c: float(c.samples.mean()),
    "std_v": lambda c: float(c.samples.std()),
    "skew_v": lambda c: _moment_ratio(c.samples, 3),
    "kurt_v": lambda c: _moment_ratio(c.samples, 4),
    "rms_v": lambda c: float(np.sqrt(np.mean(c.samples ** 2))),
    "crest_factor": lambda c: _safe_div(c.fid.peak_v,
                                        float(np.sqrt(np.mean(c.samples ** 2)))),
    # width family at one threshold level
    "width_sys": lambda c, pct: c.fid.peak_t - c.crossings(pct)[0],
    "width_dia": lambda c, pct: c.crossings(pct)[1] - c.fid.peak_t,
    "width_total": lambda c, pct: c.crossings(pct)[1] - c.crossings(pct)[0],
    "width_ratio": lambda c, pct: _safe_div(c.crossings(pct)[1] - c.fid.peak_t,
                                            c.fid.peak_t - c.crossings(pct)[0]),
    "width_frac": lambda c, pct: _safe_div(c.crossings(pct)[1] - c.crossings(pct)[0],
                                           c.duration),
    # limb slopes between threshold crossings
    "rise_slope": lambda c, lo, hi: _safe_div(
        (hi - lo) / 100.0 * c.fid.peak_v, c.crossings(hi)[0] - c.crossings(lo)[0]),
    "fall_slope": lambda c, hi, lo: _safe_div(
        (lo - hi) / 100.0 * c.fid.peak_v, c.crossings(lo)[1] - c.crossings(hi)[1]),
    # areas and energies
    "area_total": lambda c: _trapezoid(c.samples, c.dt),
    "area_sys": lambda c: _trapezoid(c.samples[:c.peak_index + 1], c.dt),
    "area_dia": lambda c: _trapezoid(c.samples[c.peak_index:], c.dt),
    "area_ratio": lambda c: _safe_div(_trapezoid(c.samples[c.peak_index:], c.dt),
                                      _trapezoid(c.samples[:c.peak_index + 1], c.dt)),
    "area_mean": lambda c: _safe_div(_trapezoid(c.samples, c.dt), c.duration),
    "energy_total": lambda c: _trapezoid(c.samples ** 2, c.dt),
    "energy_sys": lambda c: _trapezoid(c.samples[:c.peak_index + 1] ** 2, c.dt),
    "energy_dia": lambda c: _trapezoid(c.samples[c.peak_index:] ** 2, c.dt),
    # relative amplitude at a fixed fraction of the cycle
    "amp_frac_at": lambda c, frac: _safe_div(
        float(np.interp(frac * c.duration, np.arange(c.n) * c.dt, c.samples)),
        c.fid.peak_v),
    # first derivative landmarks and statistics
    "d1_onset_v": lambda c: float(c.d1[0]),
    "d1_end_v": lambda c: float(c.d1[-1]),
    "d1_max_t": lambda c: c.fid.d1_max_t,
    "d1_min_v": lambda c: c.fid.d1_min_v,
    "d1_min_t": lambda c: c.fid.d1_min_t,
    "d1_ptp": lambda c: c.fid.d1_max_v - c.fid.d1_min_v,
    "d1_extrema_dt": lambda c: c.fid.d1_min_t - c.fid.d1_max_t,
    "d1_max_to_peak_dt": lambda c: c.fid.peak_t - c.fid.d1_max_t,
    "d1_mean_abs": lambda c: float(np.mean(np.abs(c.d1))),
    "d1_std": lambda c: float(c.d1.std()),
    "d1_max_over_peak": lambda c: _safe_div(c.fid.d1_max_v, c.fid.peak_v),
    "d1_min_over_peak": lambda c: _safe_div(abs(c.fid.d1_min_v), c.fid.peak_v),
    # second derivative landmarks and statistics
    "d2_onset_v": lambda c: float(c.d2[0]),
    "d2_end_v": lambda c: float(c.d2[-1]),
    "d2_max_v": lambda c: c.fid.d2_max_v,
    "d2_max_t": lambda c: c.fid.d2_max_t,
    "d2_min_v": lambda c: c.fid.d2_min_v,
    "d2_min_t": lambda c: c.fid.d2_min_t,
    "d2_b_over_a": lambda c: _safe_div(c.fid.d2_min_v, c.fid.d2_max_v),
    "d2_ptp": lambda c: c.fid.d2_max_v - c.fid.d2_min_v,
    "d2_extrema_dt": lambda c: c.fid.d2_min_t - c.fid.d2_max_t,
    "d2_std": lambda c: float(c.d2.std()),
    "d2_max_over_peak": lambda c: _safe_div(c.fid.d2_max_v, c.fid.peak_v),
    "d2_min_over_peak": lambda c: _safe_div(abs(c.fid.d2_min_v), c.fid.peak_v),
    # dicrotic notch family; all 0 when no notch is present
    "notch_present": lambda c: 1.0 if c.fid.has_notch else 0.0,
    "notch_t": lambda c: _notch(c, "notch_t"),
    "notch_v": lambda c: _notch(c, "notch_v"),
    "notch_rel_v": lambda c: _safe_div(_notch(c, "notch_v"), c.fid.peak_v)
    if c.fid.has_notch else 0.0,
    "peak_to_notch_dt": lambda c: c.fid.notch_t - c.fid.peak_t
    if c.fid.has_notch else 0.0,
    "notch_to_end_dt": lambda c: c.duration - c.fid.notch_t
    if c.fid.has_notch else 0.0,
    "notch_pos_frac": lambda c: _safe_div(_notch(c, "notch_t"), c.duration)
    if c.fid.has_notch else 0.0,
    "dia_peak_v": lambda c: _notch(c, "dia_peak_v"),
    "dia_peak_t": lambda c: _notch(c, "dia_peak_t"),
    "augmentation_ratio": lambda c: _safe_div(_notch(c, "dia_peak_v"), c.fid.peak_v)
    if c.fid.dia_peak_v is not None else 0.0,
}


def _build_catalog() -> tuple[FeatureDef, ...]:
    defs: list[FeatureDef] = []

    def add(name, formula, params=(), unit="ratio", scale=0, time=False):
        defs.append(FeatureDef(name, formula, tuple(params), unit, scale, time))

    add("AID", "aid", unit="signal", scale=1)
    add("DID", "did", unit="signal", scale=1)
    add("AS", "asc_slope", unit="signal/s", scale=1)
    add("PI", "perfusion")
    add("der_1_PI", "d1_peak", unit="signal/s", scale=1)
    add("der_1_AS", "d1_asc_slope", unit="signal/s2", scale=1)

    add("duration_s", "duration", unit="s", time=True)
    add("hr_bpm", "hr", unit="1/min")
    add("peak_t", "peak_t", unit="s", time=True)
    add("peak_pos_frac", "peak_pos_frac")
    add("diastolic_time_s", "diastolic_time", unit="s", time=True)
    add("sys_dia_time_ratio", "sys_dia_time_ratio")
    add("onset_v", "onset_v", unit="signal", scale=1)
    add("end_v", "end_v", unit="signal", scale=1)
    add("onset_end_diff", "onset_end_diff", unit="signal", scale=1)
    add("diastolic_slope", "diastolic_slope", unit="signal/s", scale=1)
    add("mean_v", "mean_v", unit="signal", scale=1)
    add("std_v", "std_v", unit="signal", scale=1)
    add("skew_v", "skew_v")
    add("kurt_v", "kurt_v")
    add("rms_v", "rms_v", unit="signal", scale=1)
    add("crest_factor", "crest_factor")

    for pct in WIDTH_LEVELS:
        add(f"sw_{pct}", "width_sys", (pct,), unit="s", time=True)
        add(f"dw_{pct}", "width_dia", (pct,), unit="s", time=True)
        add(f"w_{pct}", "width_total", (pct,), unit="s", time=True)
        add(f"dw_sw_ratio_{pct}", "width_ratio", (pct,))
    for pct in WIDTH_LEVELS:
        add(f"w_frac_{pct}", "width_frac", (pct,))

    add("rise_slope_25_75", "rise_slope", (25, 75), unit="signal/s", scale=1)
    add("fall_slope_75_25", "fall_slope", (75, 25), unit="signal/s", scale=1)

    add("area_total", "area_total", unit="signal*s", scale=1)
    add("area_sys", "area_sys", unit="signal*s", scale=1)
    add("area_dia", "area_dia", unit="signal*s", scale=1)
    add("area_dia_sys_ratio", "area_ratio")
    add("area_mean", "area_mean", unit="signal", scale=1)
    add("energy_total", "energy_total", unit="signal^2*s", scale=2)
    add("energy_sys", "energy_sys", unit="signal^2*s", scale=2)
    add("energy_dia", "energy_dia", unit="signal^2*s", scale=2)

    for frac in (0.25, 0.50, 0.75):
        add(f"amp_frac_t{int(frac * 100)}", "amp_frac_at", (frac,))

    add("d1_onset_v", "d1_onset_v", unit="signal/s", scale=1)
    add("d1_end_v", "d1_end_v", unit="signal/s", scale=1)
    add("d1_max_t", "d1_max_t", unit="s", time=True)
    add("d1_min_v", "d1_min_v", unit="signal/s", scale=1)
    add("d1_min_t", "d1_min_t", unit="s", time=True)
    add("d1_ptp", "d1_ptp", unit="signal/s", scale=1)
    add("d1_extrema_dt", "d1_extrema_dt", unit="s", time=True)
    add("d1_max_to_peak_dt", "d1_max_to_peak_dt", unit="s", time=True)
    add("d1_mean_abs", "d1_mean_abs", unit="signal/s", scale=1)
    add("d1_std", "d1_std", unit="signal/s", scale=1)
    add("d1_max_over_peak", "d1_max_over_peak", unit="1/s")
    add("d1_min_over_peak", "d1_min_over_peak", unit="1/s")

    add("d2_onset_v", "d2_onset_v", unit="signal/s2", scale=1)
    add("d2_end_v", "d2_end_v", unit="signal/s2", scale=1)
    add("d2_max_v", "d2_max_v", unit="signal/s2", scale=1)
    add("d2_max_t", "d2_max_t", unit="s", time=True)
    add("d2_min_v", "d2_min_v", unit="signal/s2", scale=1)
    add("d2_min_t", "d2_min_t", unit="s", time=True)
    add("d2_b_over_a", "d2_b_over_a")
    add("d2_ptp", "d2_ptp", unit="signal/s2", scale=1)
    add("d2_extrema_dt", "d2_extrema_dt", unit="s", time=True)
    add("d2_std", "d2_std", unit="signal/s2", scale=1)
    add("d2_max_over_peak", "d2_max_over_peak", unit="1/s2")
    add("d2_min_over_peak", "d2_min_over_peak", unit="1/s2")

    add("notch_present", "notch_present", unit="bool")
    add("notch_t", "notch_t", unit="s", time=True)
    add("notch_v", "notch_v", unit="signal", scale=1)
    add("notch_rel_v", "notch_rel_v")
    add("peak_to_notch_dt", "peak_to_notch_dt", unit="s", time=True)
    add("notch_to_end_dt", "notch_to_end_dt", unit="s", time=True)
    add("notch_pos_frac", "notch_pos_frac")
    add("dia_peak_v", "dia_peak_v", unit="signal", scale=1)
    add("dia_peak_t", "dia_peak_t", unit="s", time=True)
    add("augmentation_ratio", "augmentation_ratio")

    catalog = tuple(defs)
    names = [d.name for d in catalog]
    assert len(catalog) == N_PPG_FEATURES, f"catalog has {len(catalog)} entries"
    assert len(set(names)) == len(names), "duplicate feature names"
    assert all(d.formula in _FORMULAS for d in catalog)
    return catalog


DEFAULT_CATALOG: tuple[FeatureDef, ...] = _build_catalog()


def catalog_names(catalog: Sequence[FeatureDef] = DEFAULT_CATALOG) -> list[str]:
    return [d.name for d in catalog]


def vector_names(catalog: Sequence[FeatureDef] = DEFAULT_CATALOG) -> list[str]:
    """All 110 classifier input names: waveform features then metadata."""
    return catalog_names(catalog) + list(METADATA_FIELDS)


def compute_features(cycle: PulseCycle, fiducials: FiducialSet | None = None,
                     catalog: Sequence[FeatureDef] = DEFAULT_CATALOG) -> np.ndarray:
    """Evaluate the catalog on one cycle, in catalog order."""
    if cycle.samples.size < 3 or cycle.duration_s <= 0.0:
        raise DegenerateCycleError("cycle has no usable duration")
    if float(cycle.samples.max() - cycle.samples.min()) <= 0.0:
        raise DegenerateCycleError("cycle has zero amplitude range")
    if fiducials is None:
        fiducials = detect_fiducials(cycle)
    ctx = _CycleContext(cycle, fiducials)
    values = np.array([_FORMULAS[d.formula](ctx, *d.params) for d in catalog],
                      dtype=float)
    if not np.isfinite(values).all():
        bad = [catalog[i].name for i in np.flatnonzero(~np.isfinite(values))]
        raise NonFiniteError(f"non-finite feature values: {', '.join(bad)}")
    return values


@dataclass(frozen=True)
class FeatureVector:
    """One classifier input row: 110 values with identity and label."""

    subject_id: str
    values: np.ndarray
    label: int

    def __post_init__(self) -> None:
        if self.values.shape != (N_FEATURES,):
            raise LengthMismatchError(
                f"expected {N_FEATURES} values, got {self.values.shape}")
        if not np.isfinite(self.values).all():
            raise NonFiniteError("feature vector holds non-finite values")


def assemble_vector(subject: SubjectRecord, ppg_features: np.ndarray,
                    fallbacks: Mapping[str, float] | None = None) -> FeatureVector:
    """Append subject metadata to the waveform features.

    Metadata order: sex (female 0, male 1), age, height, weight, heart
    rate, bmi. A missing field is filled from ``fallbacks`` (logged) or
    raises when no fallback is available.
    """
    ppg_features = np.asarray(ppg_features, dtype=float)
    if ppg_features.shape != (N_PPG_FEATURES,):
        raise LengthMismatchError(
            f"expected {N_PPG_FEATURES} waveform features, got {ppg_features.shape}")

    meta: list[float] = [1.0 if subject.sex is Sex.MALE else 0.0]
    for attr in METADATA_FIELDS[1:]:
        value = getattr(subject, attr)
        if value is None:
            if fallbacks is not None and attr in fallbacks:
                value = fallbacks[attr]
                log.info("imputed %s=%.3g for subject %s", attr, value,
                         subject.subject_id)
            else:
                raise MissingMetadataError(
                    f"subject {subject.subject_id} is missing {attr}")
        meta.append(float(value))

    return FeatureVector(
        subject_id=subject.subject_id,
        values=np.concatenate([ppg_features, np.asarray(meta)]),
        label=int(subject.has_diabetes),
    )
