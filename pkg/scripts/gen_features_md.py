"""Regenerate FEATURES.md from the in-code catalog.

Run from the repository root: python3 scripts/gen_features_md.py
"""

from pathlib import Path

from ppgscreen.features import DEFAULT_CATALOG, METADATA_FIELDS

DESCRIPTIONS = {
    "aid": "Ascending intensity difference: peak value minus onset value.",
    "did": "Descending intensity difference: peak value minus end value.",
    "asc_slope": "Ascending slope: AID divided by the onset-to-peak time.",
    "perfusion": "Perfusion index: peak value over the mean of the corrected cycle.",
    "d1_peak": "First-derivative peak: value at the first local maximum of the "
               "first derivative before the systolic peak.",
    "d1_asc_slope": "Ascending slope of the first derivative: rise from its "
                    "cycle-start value to its peak, over the time to that peak.",
    "duration": "Cycle duration in seconds (valley to valley).",
    "hr": "Instantaneous heart rate implied by the cycle duration, 60/duration.",
    "peak_t": "Time of the systolic peak from cycle onset.",
    "peak_pos_frac": "Systolic peak position as a fraction of the duration.",
    "diastolic_time": "Time from the systolic peak to the cycle end.",
    "sys_dia_time_ratio": "Rise time over fall time.",
    "onset_v": "Corrected amplitude at the cycle onset (zero by construction "
               "up to baseline interpolation).",
    "end_v": "Corrected amplitude at the cycle end.",
    "onset_end_diff": "End value minus onset value.",
    "diastolic_slope": "Mean slope of the falling limb: (end - peak) / fall time.",
    "mean_v": "Mean of the corrected samples.",
    "std_v": "Population standard deviation of the corrected samples.",
    "skew_v": "Sample skewness (third standardized moment).",
    "kurt_v": "Sample kurtosis (fourth standardized moment, not excess).",
    "rms_v": "Root mean square of the corrected samples.",
    "crest_factor": "Peak value over the RMS.",
    "width_sys": "Systolic width at {pct}% of peak: time from the last upward "
                 "{pct}%-crossing before the peak to the peak.",
    "width_dia": "Diastolic width at {pct}% of peak: time from the peak to the "
                 "first downward {pct}%-crossing after it.",
    "width_total": "Total width at {pct}% of peak (systolic + diastolic).",
    "width_ratio": "Diastolic over systolic width at {pct}% of peak.",
    "width_frac": "Total width at {pct}% of peak as a fraction of the duration.",
    "rise_slope": "Mean slope of the rising limb between its 25% and 75% "
                  "crossings.",
    "fall_slope": "Mean slope of the falling limb between its 75% and 25% "
                  "crossings (negative).",
    "area_total": "Trapezoidal area under the corrected cycle.",
    "area_sys": "Area under the rising limb (onset to peak).",
    "area_dia": "Area under the falling limb (peak to end).",
    "area_ratio": "Diastolic area over systolic area.",
    "area_mean": "Total area divided by the duration.",
    "energy_total": "Integral of the squared corrected samples.",
    "energy_sys": "Squared-sample integral over the rising limb.",
    "energy_dia": "Squared-sample integral over the falling limb.",
    "amp_frac_at": "Corrected amplitude at {frac} of the duration, relative to "
                   "the peak value.",
    "d1_onset_v": "First derivative at the cycle start.",
    "d1_end_v": "First derivative at the cycle end.",
    "d1_max_t": "Time of the first-derivative peak (steepest rise).",
    "d1_min_v": "Global minimum of the first derivative (steepest fall).",
    "d1_min_t": "Time of the first-derivative minimum.",
    "d1_ptp": "First-derivative peak-to-peak span.",
    "d1_extrema_dt": "Time from the first-derivative peak to its minimum.",
    "d1_max_to_peak_dt": "Time from the steepest rise to the systolic peak.",
    "d1_mean_abs": "Mean absolute first derivative.",
    "d1_std": "Population standard deviation of the first derivative.",
    "d1_max_over_peak": "First-derivative peak normalized by the systolic peak "
                        "value.",
    "d1_min_over_peak": "Magnitude of the first-derivative minimum normalized "
                        "by the systolic peak value.",
    "d2_onset_v": "Second derivative at the cycle start.",
    "d2_end_v": "Second derivative at the cycle end.",
    "d2_max_v": "Early positive wave of the second derivative: value at its "
                "first local maximum before the systolic peak.",
    "d2_max_t": "Time of that second-derivative maximum.",
    "d2_min_v": "Global minimum of the second derivative.",
    "d2_min_t": "Time of the second-derivative minimum.",
    "d2_b_over_a": "Second-derivative minimum over its early maximum.",
    "d2_ptp": "Second-derivative peak-to-peak span.",
    "d2_extrema_dt": "Time from the second-derivative maximum to its minimum.",
    "d2_std": "Population standard deviation of the second derivative.",
    "d2_max_over_peak": "Second-derivative maximum normalized by the systolic "
                        "peak value.",
    "d2_min_over_peak": "Magnitude of the second-derivative minimum normalized "
                        "by the systolic peak value.",
    "notch_present": "1 when a dicrotic notch was found, else 0. When it is 0, "
                     "every other notch feature is 0.",
    "notch_t": "Time of the dicrotic notch (first post-peak local minimum "
               "followed by a local maximum).",
    "notch_v": "Corrected amplitude at the notch.",
    "notch_rel_v": "Notch amplitude relative to the systolic peak.",
    "peak_to_notch_dt": "Time from the systolic peak to the notch.",
    "notch_to_end_dt": "Time from the notch to the cycle end.",
    "notch_pos_frac": "Notch position as a fraction of the duration.",
    "dia_peak_v": "Corrected amplitude at the diastolic peak (first local "
                  "maximum after the notch).",
    "dia_peak_t": "Time of the diastolic peak.",
    "augmentation_ratio": "Diastolic peak amplitude over the systolic peak.",
}

META_DESCRIPTIONS = {
    "sex": "Subject sex encoded female=0, male=1.",
    "age": "Age in years.",
    "height_cm": "Height in centimeters.",
    "weight_kg": "Weight in kilograms.",
    "heart_rate_bpm": "Resting heart rate in beats per minute.",
    "bmi": "Body mass index in kg/m^2.",
}


def describe(entry) -> str:
    text = DESCRIPTIONS[entry.formula]
    if entry.params:
        if entry.formula == "amp_frac_at":
            text = text.format(frac=f"{entry.params[0]:.0%}")
        elif entry.formula in ("rise_slope", "fall_slope"):
            pass
        else:
            text = text.format(pct=entry.params[0])
    return text


def main() -> None:
    lines = [
        "# Feature catalog",
        "",
        "The classifier input is a fixed-order vector of 110 values: the 104",
        "waveform features below, computed per heartbeat cycle on the",
        "baseline-corrected signal, followed by 6 subject metadata fields.",
        "This ordering is part of the interface: model weights, permutation",
        "importances, and the features CSV all use it. Blood pressure is",
        "never an input.",
        "",
        "Cycles are valley-to-valley slices after low-pass filtering and",
        "baseline subtraction, so amplitudes are relative to the removed",
        "baseline and times are seconds from the cycle onset. Derivatives",
        "use central differences (one-sided at the cycle edges). Threshold",
        "crossings interpolate linearly between samples. When no dicrotic",
        "notch is detected, `notch_present` is 0 and so is every other",
        "notch-derived entry.",
        "",
        "## Waveform features (indices 0-103)",
        "",
        "| # | name | unit | description |",
        "|---|------|------|-------------|",
    ]
    for i, entry in enumerate(DEFAULT_CATALOG):
        lines.append(f"| {i} | `{entry.name}` | {entry.unit} | {describe(entry)} |")
    lines += [
        "",
        "Units: `signal` is the corrected PPG amplitude (arbitrary input",
        "units), `s` is seconds, `ratio`/`bool` are dimensionless. Scaling",
        "the cycle amplitude by c scales `signal`-family features by c",
        "(`signal^2*s` by c^2) and leaves times, ratios, and booleans",
        "unchanged.",
        "",
        "## Metadata fields (indices 104-109)",
        "",
        "| # | name | description |",
        "|---|------|-------------|",
    ]
    for i, name in enumerate(METADATA_FIELDS):
        lines.append(f"| {104 + i} | `{name}` | {META_DESCRIPTIONS[name]} |")
    lines.append("")
    Path("FEATURES.md").write_text("\n".join(lines), encoding="utf-8")
    print(f"wrote FEATURES.md with {len(DEFAULT_CATALOG)} waveform features")


if __name__ == "__main__":
    main()
