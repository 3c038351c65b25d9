"""Landmark detection on a single baseline-corrected heartbeat cycle.

Landmarks: the systolic peak, the steepest-rise point (first local maximum
of the first derivative before the peak), derivative extrema, and - when
present - the dicrotic notch with the diastolic peak that follows it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import PulseCycle
from .errors import NoPeakError


def derivative(samples: np.ndarray, sample_rate_hz: float) -> np.ndarray:
    """First derivative: central differences inside, one-sided at the edges."""
    return np.gradient(samples, 1.0 / sample_rate_hz, edge_order=1)


@dataclass(frozen=True)
class FiducialSet:
    """Landmark times (seconds from cycle onset) and values."""

    duration_s: float
    onset_v: float
    peak_t: float
    peak_v: float
    end_v: float
    d1_max_t: float
    d1_max_v: float
    d1_min_t: float
    d1_min_v: float
    d2_max_t: float
    d2_max_v: float
    d2_min_t: float
    d2_min_v: float
    notch_t: float | None = None
    notch_v: float | None = None
    dia_peak_t: float | None = None
    dia_peak_v: float | None = None

    @property
    def onset_t(self) -> float:
        return 0.0

    @property
    def end_t(self) -> float:
        return self.duration_s

    @property
    def has_notch(self) -> bool:
        return self.notch_t is not None


def _first_local_max_before(values: np.ndarray, limit: int) -> int | None:
    """Earliest interior local maximum at an index strictly below ``limit``."""
    for i in range(1, limit):
        if values[i] > values[i - 1] and values[i] >= values[i + 1]:
            return i
    return None


def _notch_and_diastolic_peak(samples: np.ndarray, peak_index: int):
    """First post-peak local minimum that is followed by a local maximum."""
    n = samples.size
    i = peak_index + 1
    while i < n - 1:
        if samples[i] < samples[i - 1] and samples[i] <= samples[i + 1]:
            for j in range(i + 1, n - 1):
                if samples[j] > samples[j - 1] and samples[j] >= samples[j + 1]:
                    return i, j
        i += 1
    return None, None


def detect_fiducials(cycle: PulseCycle) -> FiducialSet:
    """Locate the landmark set of one cycle.

    The systolic peak is the global maximum (earliest index on ties). The
    steepest-rise landmark is the first local maximum of the first
    derivative strictly before the peak, falling back to the plain argmax
    over the rising limb when the limb is too short to hold an interior
    local maximum. Derivative minima (and the early maximum of the second
    derivative) follow the same conventions. The dicrotic notch is
    optional: many recordings simply do not show one.
    """
    samples = cycle.samples
    fs = cycle.sample_rate_hz
    if np.all(samples == samples[0]):
        raise NoPeakError("cycle has no peak: all samples are equal")

    peak_index = int(np.argmax(samples))
    d1 = derivative(samples, fs)
    d2 = derivative(d1, fs)

    d1_max_index = _first_local_max_before(d1, peak_index)
    if d1_max_index is None:
        d1_max_index = int(np.argmax(d1[:peak_index + 1]))
    d1_min_index = int(np.argmin(d1))

    d2_max_index = _first_local_max_before(d2, peak_index)
    if d2_max_index is None:
        d2_max_index = int(np.argmax(d2[:peak_index + 1]))
    d2_min_index = int(np.argmin(d2))

    notch_index, dia_peak_index = _notch_and_diastolic_peak(samples, peak_index)

    return FiducialSet(
        duration_s=cycle.duration_s,
        onset_v=float(samples[0]),
        peak_t=peak_index / fs,
        peak_v=float(samples[peak_index]),
        end_v=float(samples[-1]),
        d1_max_t=d1_max_index / fs,
        d1_max_v=float(d1[d1_max_index]),
        d1_min_t=d1_min_index / fs,
        d1_min_v=float(d1[d1_min_index]),
        d2_max_t=d2_max_index / fs,
        d2_max_v=float(d2[d2_max_index]),
        d2_min_t=d2_min_index / fs,
        d2_min_v=float(d2[d2_min_index]),
        notch_t=None if notch_index is None else notch_index / fs,
        notch_v=None if notch_index is None else float(samples[notch_index]),
        dia_peak_t=None if dia_peak_index is None else dia_peak_index / fs,
        dia_peak_v=None if dia_peak_index is None else float(samples[dia_peak_index]),
    )
