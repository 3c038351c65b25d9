"""Signal conditioning: low-pass filtering, sliding-window baseline removal,
and heartbeat segmentation with validation.

The baseline remover scans the signal with a centered window, marks every
sample that is the (earliest) strict minimum of its window as a valley,
draws a piecewise-linear baseline through the valleys, and subtracts it.
The same valleys then delimit candidate heartbeat cycles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import minimum_filter1d
from scipy.signal import butter, sosfilt, sosfiltfilt

from .dataset import Segment
from .errors import InvalidSpecError, NoValleysError, TooShortError

log = logging.getLogger(__name__)

MODE_FORWARD = "forward"
MODE_ZERO_PHASE = "zero_phase"

REJECT_TOO_SHORT = "too_short"
REJECT_TOO_LONG = "too_long"
REJECT_PEAK_POSITION = "peak_position"
REJECT_LOW_PROMINENCE = "low_prominence"
REJECT_NONPOSITIVE_PEAK = "nonpositive_peak"


@dataclass(frozen=True)
class FilterSpec:
    """Low-pass Butterworth specification.

    The order must be even so the design decomposes into exact second-order
    sections; the cutoff must sit strictly below Nyquist.
    """

    order: int = 6
    cutoff_hz: float = 16.0
    sample_rate_hz: float = 1000.0
    mode: str = MODE_ZERO_PHASE

    def __post_init__(self) -> None:
        if self.order < 2 or self.order % 2 != 0:
            raise InvalidSpecError(f"filter order must be a positive even int, got {self.order}")
        if not self.sample_rate_hz > 0:
            raise InvalidSpecError("sample rate must be positive")
        if not 0 < self.cutoff_hz < self.sample_rate_hz / 2:
            raise InvalidSpecError(
                f"cutoff {self.cutoff_hz} Hz must lie in (0, Nyquist="
                f"{self.sample_rate_hz / 2} Hz)")
        if self.mode not in (MODE_FORWARD, MODE_ZERO_PHASE):
            raise InvalidSpecError(f"unknown filter mode {self.mode!r}")


@dataclass(frozen=True)
class FilterCoefficients:
    """Cascaded second-order sections realizing a FilterSpec."""

    sos: np.ndarray  # shape (order // 2, 6)
    spec: FilterSpec


def design_lowpass(spec: FilterSpec) -> FilterCoefficients:
    """Design the Butterworth low-pass as second-order sections.

    The bilinear transform with frequency prewarping places the -3 dB
    point exactly at ``cutoff_hz``; DC gain is exactly 1.
    """
    sos = butter(spec.order, spec.cutoff_hz, btype="low",
                 fs=spec.sample_rate_hz, output="sos")
    return FilterCoefficients(sos=np.asarray(sos, dtype=float), spec=spec)


def filter_segment(segment: Segment, spec: FilterSpec | None = None) -> Segment:
    """Apply the low-pass to one segment.

    In zero-phase mode the filter runs forward and backward so the output
    has no phase lag; edge transients are handled by reflective padding of
    3 x order samples. Forward mode is a single causal pass.
    """
    spec = spec if spec is not None else FilterSpec(sample_rate_hz=segment.sample_rate_hz)
    if segment.sample_rate_hz != spec.sample_rate_hz:
        raise InvalidSpecError(
            f"segment rate {segment.sample_rate_hz} != filter rate {spec.sample_rate_hz}")
    n = segment.samples.size
    if n < 3 * spec.order:
        raise TooShortError(
            f"segment of {n} samples is shorter than 3 x order = {3 * spec.order}")
    coeffs = design_lowpass(spec)
    if spec.mode == MODE_ZERO_PHASE:
        padlen = min(3 * spec.order, n - 1)
        out = sosfiltfilt(coeffs.sos, segment.samples, padtype="even", padlen=padlen)
    else:
        out = sosfilt(coeffs.sos, segment.samples)
    return Segment(np.asarray(out, dtype=float), segment.sample_rate_hz)


@dataclass(frozen=True)
class BaselineFit:
    """Valley locations and the piecewise-linear baseline they define."""

    valley_indices: np.ndarray  # strictly increasing ints
    baseline: np.ndarray        # same length as the segment


def find_valleys(samples: np.ndarray, sample_rate_hz: float,
                 window_s: float = 0.5, min_gap_s: float = 0.4) -> np.ndarray:
    """Sliding-window valley detection.

    Sample i is a valley iff it is the earliest index attaining the minimum
    of its centered window (truncated at the segment edges) and the window
    holds at least one strictly greater sample. Valleys closer together
    than ``min_gap_s`` are merged, keeping the deeper one (ties keep the
    earlier).
    """
    n = samples.size
    half = max(1, int(round(window_s * sample_rate_hz / 2)))
    size = 2 * half + 1
    # minimum over the centered window; edge windows are effectively
    # truncated because 'nearest' padding repeats a value already inside
    window_min = minimum_filter1d(samples, size=size, mode="nearest")
    candidates = np.flatnonzero(samples == window_min)

    valleys: list[int] = []
    for i in candidates:
        lo = max(0, i - half)
        hi = min(n, i + half + 1)
        window = samples[lo:hi]
        if lo + int(np.argmin(window)) != i:
            continue  # an earlier sample in the window ties the minimum
        if not (window > samples[i]).any():
            continue  # flat window: nothing to be a minimum of
        valleys.append(int(i))

    min_gap = min_gap_s * sample_rate_hz
    merged: list[int] = []
    for v in valleys:
        if merged and v - merged[-1] < min_gap:
            if samples[v] < samples[merged[-1]]:
                merged[-1] = v
        else:
            merged.append(v)
    return np.asarray(merged, dtype=int)


def fsw_baseline(segment: Segment, window_s: float = 0.5,
                 min_gap_s: float = 0.4) -> BaselineFit:
    """Fit the through-the-valleys baseline of one filtered segment.

    The baseline interpolates linearly between consecutive valleys and
    extends flat (edge value) beyond the first and last valley, so the
    corrected signal is exactly zero at every valley.
    """
    valleys = find_valleys(segment.samples, segment.sample_rate_hz,
                           window_s=window_s, min_gap_s=min_gap_s)
    if valleys.size == 0:
        raise NoValleysError("no valleys found; signal may be constant")
    x = np.arange(segment.samples.size, dtype=float)
    baseline = np.interp(x, valleys.astype(float), segment.samples[valleys])
    return BaselineFit(valley_indices=valleys, baseline=baseline)


def correct_baseline(segment: Segment, fit: BaselineFit) -> Segment:
    """Subtract the fitted baseline from the segment."""
    return Segment(segment.samples - fit.baseline, segment.sample_rate_hz)


@dataclass(frozen=True)
class PulseCycle:
    """One valley-to-valley heartbeat cut from a corrected segment."""

    samples: np.ndarray
    sample_rate_hz: float
    onset_index: int
    end_index: int
    subject_id: str = ""

    @property
    def duration_s(self) -> float:
        return (self.end_index - self.onset_index) / self.sample_rate_hz


@dataclass(frozen=True)
class CycleRules:
    """Acceptance rules for candidate heartbeat cycles."""

    min_s: float = 0.4
    max_s: float = 1.5
    peak_prominence_frac: float = 0.5
    max_peak_pos_frac: float = 0.6


def candidate_cycles(segment: Segment, fit: BaselineFit,
                     subject_id: str = "") -> list[PulseCycle]:
    """Baseline-corrected valley-to-valley slices, no validation applied.

    Partial data before the first valley and after the last is discarded.
    Each slice includes both bounding valleys, so its first and last
    samples sit exactly on the (removed) baseline.
    """
    corrected = segment.samples - fit.baseline
    cycles: list[PulseCycle] = []
    valleys = fit.valley_indices
    for v0, v1 in zip(valleys[:-1], valleys[1:]):
        cycles.append(PulseCycle(
            samples=corrected[v0:v1 + 1].copy(),
            sample_rate_hz=segment.sample_rate_hz,
            onset_index=int(v0),
            end_index=int(v1),
            subject_id=subject_id,
        ))
    return cycles


def _dominant_peak_prominence(samples: np.ndarray, peak_index: int) -> float:
    """Prominence of the tallest peak: height above the higher of the two
    lowest points flanking it within the cycle."""
    left_min = samples[:peak_index + 1].min()
    right_min = samples[peak_index:].min()
    return float(samples[peak_index] - max(left_min, right_min))


def validate_cycle(cycle: PulseCycle, rules: CycleRules = CycleRules()) -> str | None:
    """Return None when the cycle is acceptable, else the rejection reason.

    A cycle passes when its duration is plausible for a human heartbeat,
    its tallest peak is dominant (prominence at least
    ``peak_prominence_frac`` of the amplitude range), that peak sits in the
    first ``max_peak_pos_frac`` of the cycle, and its amplitude is positive.
    """
    duration = cycle.duration_s
    if duration < rules.min_s:
        return REJECT_TOO_SHORT
    if duration > rules.max_s:
        return REJECT_TOO_LONG
    samples = cycle.samples
    peak_index = int(np.argmax(samples))
    peak_value = float(samples[peak_index])
    if peak_value <= 0.0:
        return REJECT_NONPOSITIVE_PEAK
    value_range = float(samples.max() - samples.min())
    if value_range <= 0.0:
        return REJECT_LOW_PROMINENCE
    if _dominant_peak_prominence(samples, peak_index) < rules.peak_prominence_frac * value_range:
        return REJECT_LOW_PROMINENCE
    if peak_index > rules.max_peak_pos_frac * (samples.size - 1):
        return REJECT_PEAK_POSITION
    return None


def segment_cycles(segment: Segment, fit: BaselineFit,
                   rules: CycleRules = CycleRules(),
                   subject_id: str = "") -> list[PulseCycle]:
    """Cut the segment into validated heartbeat cycles.

    Candidates failing validation are dropped and the reason logged.
    """
    accepted: list[PulseCycle] = []
    for cycle in candidate_cycles(segment, fit, subject_id=subject_id):
        reason = validate_cycle(cycle, rules)
        if reason is None:
            accepted.append(cycle)
        else:
            log.debug("dropped cycle [%d, %d] of %s: %s",
                      cycle.onset_index, cycle.end_index, subject_id or "<segment>",
                      reason)
    return accepted
