"""Simulation bench for verifying smart-meter power-quality indicators.

A two-tone stimulus is swept across the frequency of its additional
component; a reference analyzer and simulated meter models each report
Pst, THD, fundamental frequency and rms voltage, and the campaign layer
classifies the disagreement.
"""
from .signals import SamplingSpec, TestSignalParams, Waveform, make_phases, synth_two_tone
from .dsp import (
    AnalogFilterSpec,
    DigitalFilter,
    FilterKind,
    Spectrum,
    apply_filter,
    classifier_percentile,
    CumulativeClassifier,
    design_filter,
    dft_integer_cycles,
    resample,
)
from .reference import (
    FlickermeterConfig,
    ReferenceReadings,
    analyze,
    calibrate_flickermeter,
    flicker_pst,
    fundamental_frequency,
    harmonic_groups,
    instantaneous_flicker,
    reference_thd,
    thd_subgrouped,
)
from .meters import IDEAL, PRESETS, MeterModelSpec, MeterReadings, acquire, get_preset, read_meter
from .campaign import (
    LimitSet,
    Status,
    SweepConfig,
    SweepResult,
    TolerancePolicy,
    Verdict,
    run_sweep,
    verdict,
)
from .report import emit_plots, read_csv, summarize, write_csv, write_report

__version__ = "0.1.0"

__all__ = [
    "SamplingSpec", "TestSignalParams", "Waveform", "make_phases", "synth_two_tone",
    "AnalogFilterSpec", "DigitalFilter", "FilterKind", "Spectrum", "apply_filter",
    "classifier_percentile", "CumulativeClassifier", "design_filter", "dft_integer_cycles",
    "resample", "FlickermeterConfig", "ReferenceReadings", "analyze", "calibrate_flickermeter",
    "flicker_pst", "fundamental_frequency", "harmonic_groups", "instantaneous_flicker",
    "reference_thd", "thd_subgrouped", "IDEAL", "PRESETS", "MeterModelSpec", "MeterReadings",
    "acquire", "get_preset", "read_meter", "LimitSet", "Status", "SweepConfig", "SweepResult",
    "TolerancePolicy", "Verdict", "run_sweep", "verdict", "emit_plots", "read_csv", "summarize",
    "write_csv", "write_report",
]
