"""Reference (class-A analyzer) indicator chain.

Pst follows the IEC 61000-4-15 flickermeter block structure, THD uses the
IEC 61000-4-7 harmonic subgroups over 10-cycle windows, and the fundamental
frequency is obtained by cycle counting after a band-pass around the
nominal frequency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.ndimage import uniform_filter1d

from .dsp import (
    AnalogFilterSpec,
    AnalogSection,
    CumulativeClassifier,
    DigitalFilter,
    FilterKind,
    Spectrum,
    design_filter,
    dft_integer_cycles,
    filter_array,
)
from .signals import Waveform


@dataclass(frozen=True)
class WeightingConstants:
    """Lamp-eye weighting filter; frequencies in Hz (multiplied by 2 pi in use)."""

    k: float = 1.74802
    lambda_hz: float = 4.05981
    f1: float = 9.15494
    f2: float = 2.27979
    f3: float = 1.22535
    f4: float = 21.9


# 230 V / 50 Hz incandescent lamp.
WEIGHTING_230V_50HZ = WeightingConstants()

# (multiplier, percentiles averaged into the smoothed level)
PST_TERMS = (
    (0.0314, (0.1,)),
    (0.0525, (0.7, 1.0, 1.5)),
    (0.0657, (2.2, 3.0, 4.0)),
    (0.28, (6.0, 8.0, 10.0, 13.0, 17.0)),
    (0.08, (30.0, 50.0, 80.0)),
)

CALIBRATION_FREQUENCY = 8.8
# Relative voltage change (peak to peak) giving Pinst = 1 at 8.8 Hz.
CALIBRATION_DV_V = 0.0025


@dataclass(frozen=True)
class FlickermeterConfig:
    f_nominal: float = 50.0
    weighting: WeightingConstants = WEIGHTING_230V_50HZ
    highpass_cutoff: float = 0.05
    lowpass_cutoff: float = 35.0
    lowpass_order: int = 6
    smoothing_tau: float = 0.3
    norm_cycles: int = 10
    norm_tau: float = 1.0
    observation_window: float = 60.0
    settle: float = 5.0
    calibration_gain: Optional[float] = None

    def __post_init__(self):
        if self.observation_window < 10.0:
            raise ValueError("observation window must be at least 10 s")
        if self.calibration_gain is not None and not (
                math.isfinite(self.calibration_gain) and self.calibration_gain > 0):
            raise ValueError("calibration gain must be positive and finite")

    @property
    def record_length(self) -> float:
        return self.settle + self.observation_window

    def weighting_spec(self) -> AnalogFilterSpec:
        p = self.weighting
        two_pi = 2 * math.pi
        lam, w1 = two_pi * p.lambda_hz, two_pi * p.f1
        w2, w3, w4 = two_pi * p.f2, two_pi * p.f3, two_pi * p.f4
        sections = (
            AnalogSection((0.0, p.k * w1, 0.0), (1.0, 2 * lam, w1 * w1)),
            AnalogSection((0.0, 1.0 / w2, 1.0), (0.0, 1.0 / w3, 1.0)),
            AnalogSection((0.0, 0.0, 1.0), (0.0, 1.0 / w4, 1.0)),
        )
        return AnalogFilterSpec(FilterKind.RATIONAL_SECTIONS, sections=sections)

    def filter_key(self) -> "FlickermeterConfig":
        """Copy stripped of fields that do not affect the filter designs."""
        return replace(self, calibration_gain=None, observation_window=60.0, settle=5.0)


@dataclass(frozen=True)
class ReferenceReadings:
    pst: float
    thd: float
    f_meas: float
    u_rms: float
    window_meta: Dict[str, float] = field(default_factory=dict, compare=False)

    def as_dict(self) -> Dict[str, float]:
        return {"pst": self.pst, "thd": self.thd, "f_meas": self.f_meas, "u_rms": self.u_rms}


@dataclass(frozen=True)
class GroupedSpectrum:
    """Harmonic subgroups ``harmonic[h]`` and centred interharmonic subgroups
    ``interharmonic[h]`` (between orders h and h+1), indexed by order."""

    harmonic: np.ndarray
    interharmonic: np.ndarray

    @property
    def fundamental(self) -> float:
        return float(self.harmonic[1])

    @property
    def max_harmonic(self) -> int:
        return self.harmonic.size - 1


# Relative level below which the fundamental counts as absent (numerical zero).
FUNDAMENTAL_FLOOR = 1e-9


# --- rms ------------------------------------------------------------------

def rms_sliding(w: Waveform, f_c: float = 50.0, cycles: int = 10) -> Tuple[np.ndarray, np.ndarray]:
    """Contiguous non-overlapping 10-cycle rms values as ``(times, values)``."""
    n = int(round(cycles * w.fs / f_c))
    n_win = w.samples.size // n
    if n_win < 1:
        raise ValueError(f"need at least {cycles} cycles of signal")
    frames = w.samples[: n_win * n].reshape(n_win, n)
    times = w.start_time + np.arange(n_win) * n / w.fs
    return times, np.sqrt(np.mean(frames**2, axis=1))


def aggregate_rms(w: Waveform, f_c: float = 50.0) -> float:
    _, values = rms_sliding(w, f_c)
    return float(np.sqrt(np.mean(values**2)))


# --- harmonics --------------------------------------------------------------

def harmonic_groups(s: Spectrum, f_c: float = 50.0, max_harmonic: int = 40) -> GroupedSpectrum:
    n = s.window_cycles
    if not math.isclose(s.bin_spacing * n, f_c, rel_tol=1e-9) or n < 4:
        raise ValueError(f"bin spacing {s.bin_spacing} Hz does not match {n} cycles of {f_c} Hz")
    c2 = s.bin_values**2
    need = n * max_harmonic + n - 2
    if c2.size <= need:
        raise ValueError(f"spectrum needs bins up to {need}, has {c2.size - 1}")
    harm = np.zeros(max_harmonic + 1)
    inter = np.zeros(max_harmonic + 1)
    for h in range(1, max_harmonic + 1):
        harm[h] = math.sqrt(c2[n * h - 1: n * h + 2].sum())
    for h in range(0, max_harmonic + 1):
        inter[h] = math.sqrt(c2[n * h + 2: n * h + n - 1].sum())
    return GroupedSpectrum(harm, inter)


def thd_subgrouped(g: GroupedSpectrum, max_harmonic: int = 40) -> float:
    g1 = g.fundamental
    scale = max(float(g.harmonic.max()), float(g.interharmonic.max()))
    if not g1 > FUNDAMENTAL_FLOOR * scale:
        raise ValueError("fundamental subgroup is zero")
    top = min(max_harmonic, g.max_harmonic)
    return float(math.sqrt(np.sum((g.harmonic[2: top + 1] / g1) ** 2)))


def max_harmonic_for(fs: float, f_c: float, window_cycles: int = 10, upper: int = 40) -> int:
    """Highest order whose subgroups fit below Nyquist."""
    n_bins = int(round(window_cycles * fs / f_c)) // 2 + 1
    h = (n_bins - 1 - (window_cycles - 2)) // window_cycles
    return max(1, min(upper, h))


def reference_thd(w: Waveform, f_c: float = 50.0, max_harmonic: int = 40) -> float:
    s = dft_integer_cycles(w, f_c, 10)
    top = min(max_harmonic, max_harmonic_for(w.fs, f_c))
    return thd_subgrouped(harmonic_groups(s, f_c, top), top)


# --- flicker ----------------------------------------------------------------

@lru_cache(maxsize=64)
def _flicker_filters(cfg: FlickermeterConfig, fs: float):
    hp = design_filter(AnalogFilterSpec(FilterKind.FIRST_ORDER_HIGHPASS, 1, cfg.highpass_cutoff), fs)
    lp = design_filter(
        AnalogFilterSpec(FilterKind.BUTTERWORTH_LOWPASS, cfg.lowpass_order, cfg.lowpass_cutoff), fs)
    wt = design_filter(cfg.weighting_spec(), fs)
    sm = design_filter(
        AnalogFilterSpec(FilterKind.FIRST_ORDER_LOWPASS, 1, 1 / (2 * math.pi * cfg.smoothing_tau)), fs)
    nrm = design_filter(
        AnalogFilterSpec(FilterKind.FIRST_ORDER_LOWPASS, 1, 1 / (2 * math.pi * cfg.norm_tau)), fs)
    band = DigitalFilter(np.vstack([hp.sos, lp.sos, wt.sos]), fs)
    return nrm, band, sm


def flicker_filters(cfg: FlickermeterConfig, fs: float):
    return _flicker_filters(cfg.filter_key(), float(fs))


def instantaneous_flicker(w: Waveform, cfg: FlickermeterConfig, gain: Optional[float] = None) -> np.ndarray:
    """Blocks 1-4: normalized, demodulated, weighted and smoothed sensation."""
    gain = cfg.calibration_gain if gain is None else gain
    if gain is None:
        raise ValueError("flickermeter is not calibrated")
    nrm, band, sm = flicker_filters(cfg, w.fs)
    x = w.samples
    n_norm = int(round(cfg.norm_cycles * w.fs / cfg.f_nominal))
    ms = uniform_filter1d(x * x, n_norm, mode="reflect")
    ms = filter_array(nrm, ms, "steady_state_prefill")
    # x / (sqrt(2) * rms) squared
    demod = (x * x) / (2.0 * ms)
    y = filter_array(band, demod, "steady_state_prefill", initial=float(np.mean(demod[:n_norm])))
    return gain * filter_array(sm, y * y, "steady_state_prefill")


def pst_from_classifier(c: CumulativeClassifier) -> float:
    acc = 0.0
    for weight, levels in PST_TERMS:
        acc += weight * np.mean([c.percentile(p) for p in levels])
    return float(math.sqrt(acc))


def flicker_pst(w: Waveform, cfg: FlickermeterConfig) -> float:
    if cfg.calibration_gain is None:
        raise ValueError("flickermeter is not calibrated")
    if w.duration + 0.5 / w.fs < cfg.record_length:
        raise ValueError(
            f"record of {w.duration:.2f} s is shorter than settle + window = {cfg.record_length} s")
    p_inst = instantaneous_flicker(w, cfg)
    i0 = int(round(cfg.settle * w.fs))
    i1 = i0 + int(round(cfg.observation_window * w.fs))
    c = CumulativeClassifier()
    c.add(p_inst[i0:i1])
    return pst_from_classifier(c)


def modulated_carrier(fs: float, duration: float, f_mod: float = CALIBRATION_FREQUENCY,
                      dv_v: float = CALIBRATION_DV_V, u_c: float = 230.0, f_c: float = 50.0) -> Waveform:
    """Carrier with sinusoidal amplitude modulation of peak-to-peak depth ``dv_v``."""
    t = np.arange(int(round(duration * fs))) / fs
    env = 1.0 + 0.5 * dv_v * np.sin(2 * np.pi * f_mod * t)
    return Waveform(math.sqrt(2) * u_c * env * np.cos(2 * np.pi * f_c * t), fs)


def calibrate_flickermeter(cfg: FlickermeterConfig = FlickermeterConfig(), fs: float = 10_000.0,
                           duration: float = 10.0) -> FlickermeterConfig:
    """Fix the block-4 gain so the 8.8 Hz reference modulation peaks at Pinst = 1."""
    w = modulated_carrier(fs, cfg.settle + duration, u_c=230.0, f_c=cfg.f_nominal)
    s = instantaneous_flicker(w, cfg, gain=1.0)
    peak = float(np.max(s[int(round(cfg.settle * fs)):]))
    if not (math.isfinite(peak) and peak > 0):
        raise RuntimeError("flickermeter gain search did not converge; check the filter design")
    gain = 1.0 / peak
    if not math.isfinite(gain):
        raise RuntimeError("flickermeter gain search did not converge; check the filter design")
    return replace(cfg, calibration_gain=gain)


@lru_cache(maxsize=8)
def default_flickermeter(observation_window: float = 60.0) -> FlickermeterConfig:
    return calibrate_flickermeter(FlickermeterConfig(observation_window=observation_window))


# --- frequency ---------------------------------------------------------------

@lru_cache(maxsize=16)
def _bandpass(fs: float, lo: float, hi: float, order: int) -> DigitalFilter:
    hp = design_filter(AnalogFilterSpec(FilterKind.BUTTERWORTH_HIGHPASS, order, lo), fs)
    lp = design_filter(AnalogFilterSpec(FilterKind.BUTTERWORTH_LOWPASS, order, hi), fs)
    return DigitalFilter(np.vstack([hp.sos, lp.sos]), fs)


def positive_zero_crossings(x: np.ndarray, fs: float) -> np.ndarray:
    """Linearly interpolated instants (s, from sample 0) of upward zero crossings."""
    idx = np.flatnonzero((x[:-1] < 0) & (x[1:] >= 0))
    a, b = x[idx], x[idx + 1]
    return (idx + a / (a - b)) / fs


def count_cycles_frequency(x: np.ndarray, fs: float) -> float:
    t = positive_zero_crossings(x, fs)
    if t.size < 2:
        raise ValueError("fewer than two zero crossings; signal is degenerate")
    return float((t.size - 1) / (t[-1] - t[0]))


def fundamental_frequency(w: Waveform, f_nominal: float = 50.0, interval: float = 10.0) -> float:
    """Upward zero-crossing count over ``interval`` seconds after a 35-65 Hz band-pass."""
    if not 42.5 <= f_nominal <= 57.5:
        raise ValueError("f_nominal must lie in [42.5, 57.5] Hz")
    if w.duration + 0.5 / w.fs < interval:
        raise ValueError(f"need {interval} s of signal, have {w.duration:.3f} s")
    lead = min(1.0, max(0.0, w.duration - interval))
    n_lead = int(round(lead * w.fs))
    n_total = n_lead + int(round(interval * w.fs))
    bp = _bandpass(float(w.fs), 0.7 * f_nominal, 1.3 * f_nominal, 4)
    y = filter_array(bp, w.samples[:n_total], "zero_state")
    return count_cycles_frequency(y[n_lead:], w.fs)


# --- bundle --------------------------------------------------------------------

def analyze(w: Waveform, cfg: Optional[FlickermeterConfig] = None) -> ReferenceReadings:
    """All four reference indicators on one record.

    Pst uses the whole record (its first ``cfg.settle`` seconds only prime the
    filters); the other indicators are evaluated after the settle interval.
    """
    cfg = cfg or default_flickermeter()
    pst = flicker_pst(w, cfg)
    body = w.trimmed(cfg.settle) if w.duration > cfg.settle + 10.0 else w
    f_c = cfg.f_nominal
    meta = {
        "pst_window_s": cfg.observation_window,
        "settle_s": cfg.settle,
        "thd_window_s": body.duration,
        "frequency_window_s": 10.0,
        "rms_window_s": body.duration,
    }
    return ReferenceReadings(
        pst=pst,
        thd=reference_thd(body, f_c),
        f_meas=fundamental_frequency(body, f_c),
        u_rms=aggregate_rms(body, f_c),
        window_meta=meta,
    )
