"""Shared builders for synthetic heartbeat cycles."""

import numpy as np
import pytest

from ppgscreen.dsp import PulseCycle

FS = 1000.0


def make_cycle(samples, fs=FS, subject_id=""):
    samples = np.asarray(samples, dtype=float)
    return PulseCycle(samples=samples, sample_rate_hz=fs, onset_index=0,
                      end_index=samples.size - 1, subject_id=subject_id)


def triangle_cycle(fs=FS):
    """Rise 0 to 1 over 0.2 s, linear decay back to 0 over 0.6 s."""
    rise = np.linspace(0.0, 1.0, int(0.2 * fs) + 1)
    fall = np.linspace(1.0, 0.0, int(0.6 * fs) + 1)[1:]
    return make_cycle(np.concatenate([rise, fall]), fs=fs)


def gauss_beat_samples(fs=FS, duration=0.8, amplitude=1.0, sys_center_frac=0.25,
                       sys_width_frac=0.07, dic_amp=0.3, dic_center_frac=0.6875,
                       dic_width_frac=0.12):
    """Two-Gaussian pulse: systolic peak plus a dicrotic bump.

    Defaults put the systolic peak at 0.20 s and the bump at 0.55 s of an
    0.8 s cycle.
    """
    t = np.arange(int(round(duration * fs)) + 1) / fs
    u = t / duration
    sys_wave = np.exp(-0.5 * ((u - sys_center_frac) / sys_width_frac) ** 2)
    dic_wave = np.exp(-0.5 * ((u - dic_center_frac) / dic_width_frac) ** 2)
    return amplitude * (sys_wave + dic_amp * dic_wave)


def gauss_cycle(**kwargs):
    fs = kwargs.get("fs", FS)
    return make_cycle(gauss_beat_samples(**kwargs), fs=fs)


def random_gauss_params(rng):
    """Parameter draw giving a clean pulse with a robust dicrotic notch."""
    return dict(
        duration=float(rng.uniform(0.5, 1.2)),
        amplitude=float(rng.uniform(0.5, 2.0)),
        sys_center_frac=float(rng.uniform(0.18, 0.26)),
        sys_width_frac=float(rng.uniform(0.05, 0.08)),
        dic_amp=float(rng.uniform(0.2, 0.35)),
        dic_center_frac=float(rng.uniform(0.58, 0.70)),
        dic_width_frac=float(rng.uniform(0.10, 0.13)),
    )
