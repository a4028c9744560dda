"""Simulated smart-meter acquisition and indicator chains.

A meter model fixes its sampling rate, an optional anti-aliasing stage, and
the algorithm variant used for THD and frequency. Flicker is always the
reference pipeline run at the meter rate, so any spurious Pst comes from the
acquisition itself.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np

from .dsp import (
    AnalogFilterSpec,
    DigitalFilter,
    FilterKind,
    design_filter,
    dft_integer_cycles,
    filter_array,
    resample,
)
from .reference import (
    FUNDAMENTAL_FLOOR,
    FlickermeterConfig,
    aggregate_rms,
    count_cycles_frequency,
    default_flickermeter,
    flicker_pst,
    fundamental_frequency,
    harmonic_groups,
    max_harmonic_for,
    thd_subgrouped,
)
from .signals import Waveform


class ThdMethod(str, Enum):
    SUBGROUPED = "subgrouped"
    RESIDUAL_RATIO = "residual_ratio"
    RAW_BINS_NO_GROUPING = "raw_bins_no_grouping"


class FreqMethod(str, Enum):
    REFERENCE = "reference"
    ZERO_CROSSING_WEAK_FILTER = "zero_crossing_weak_filter"


class FlickerMethod(str, Enum):
    REFERENCE_AT_METER_RATE = "reference_at_meter_rate"


WEAK_FREQ_FILTER = AnalogFilterSpec(FilterKind.FIRST_ORDER_LOWPASS, 1, 70.0)


@dataclass(frozen=True)
class MeterModelSpec:
    model_id: str
    fs_meter: float
    aaf: Optional[AnalogFilterSpec] = None
    thd_method: ThdMethod = ThdMethod.SUBGROUPED
    freq_method: FreqMethod = FreqMethod.REFERENCE
    freq_filter: AnalogFilterSpec = WEAK_FREQ_FILTER
    flicker_method: FlickerMethod = FlickerMethod.REFERENCE_AT_METER_RATE
    gain_spread: float = 0.002
    rate_spread: float = 20e-6
    n_instances: int = 3
    n_phases: int = 3
    f_c: float = 50.0
    description: str = ""

    def __post_init__(self):
        for name, enum in (("thd_method", ThdMethod), ("freq_method", FreqMethod),
                           ("flicker_method", FlickerMethod)):
            object.__setattr__(self, name, enum(getattr(self, name)))
        if not self.fs_meter > 2 * self.f_c:
            raise ValueError(f"{self.model_id}: fs_meter must exceed twice the fundamental")
        if self.n_instances < 1 or self.n_phases < 1:
            raise ValueError(f"{self.model_id}: need at least one instance and one phase")
        for name in ("gain_spread", "rate_spread"):
            if not 0.0 <= getattr(self, name) <= 0.05:
                raise ValueError(f"{self.model_id}: {name} must lie in [0, 0.05]")

    @property
    def n_readings(self) -> int:
        return self.n_instances * self.n_phases

    def without_spread(self) -> "MeterModelSpec":
        return replace(self, gain_spread=0.0, rate_spread=0.0)


@dataclass(frozen=True)
class MeterReadings:
    pst: float
    thd: float
    f_meas: float
    u_rms: float
    instance_id: int = 0
    phase_id: int = 0

    def as_dict(self) -> Dict[str, float]:
        return {"pst": self.pst, "thd": self.thd, "f_meas": self.f_meas, "u_rms": self.u_rms}


# Preset stand-ins for the three defect classes, plus a defect-free model.
PRESETS: Dict[str, MeterModelSpec] = {
    "EM-A": MeterModelSpec(
        "EM-A", 1600.0,
        aaf=AnalogFilterSpec(FilterKind.BUTTERWORTH_LOWPASS, 2, 700.0),
        description="1.6 kHz sampling behind a 2nd-order 700 Hz anti-alias filter "
                    "(wide transition band: out-of-band tones alias into the flicker band)",
    ),
    "EM-B": MeterModelSpec(
        "EM-B", 4000.0,
        thd_method=ThdMethod.RESIDUAL_RATIO,
        description="4 kHz sampling, no anti-alias filter, THD from all non-fundamental energy",
    ),
    "EM-C": MeterModelSpec(
        "EM-C", 6400.0,
        freq_method=FreqMethod.ZERO_CROSSING_WEAK_FILTER,
        freq_filter=AnalogFilterSpec(FilterKind.FIRST_ORDER_LOWPASS, 1, 2000.0),
        description="6.4 kHz sampling, frequency by zero-crossing counting behind a "
                    "first-order 2 kHz fundamental filter (too weak to suppress extra crossings)",
    ),
}

IDEAL = MeterModelSpec("IDEAL", 10_000.0, gain_spread=0.0, rate_spread=0.0,
                       description="defect-free chain at the reference rate")


def get_preset(name: str) -> MeterModelSpec:
    if name == IDEAL.model_id:
        return IDEAL
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown meter preset {name!r}; known: {sorted(PRESETS)}") from None


def derive_seed(master_seed: int, model_id: str, instance: int, phase: int) -> int:
    """Stable per-reading seed; independent of which other models are present."""
    text = f"{master_seed}|{model_id}|{instance}|{phase}".encode()
    return int.from_bytes(hashlib.sha256(text).digest()[:8], "little")


def instance_perturbation(spec: MeterModelSpec, instance_seed: int) -> Tuple[float, float]:
    """(gain factor, sampling-rate factor) for one meter channel."""
    if spec.gain_spread == 0.0 and spec.rate_spread == 0.0:
        return 1.0, 1.0
    rng = np.random.default_rng(instance_seed)
    gain = 1.0 + rng.uniform(-spec.gain_spread, spec.gain_spread)
    rate = 1.0 + rng.uniform(-spec.rate_spread, spec.rate_spread)
    return float(gain), float(rate)


@lru_cache(maxsize=64)
def _design_cached(spec: AnalogFilterSpec, fs: float) -> DigitalFilter:
    return design_filter(spec, fs)


def acquire(w: Waveform, spec: MeterModelSpec, instance_seed: int = 0) -> Waveform:
    """Model the meter front end: perturbed gain and clock, anti-alias stage, sampling.

    The returned waveform is labelled with the nominal ``fs_meter`` even when
    the instance clock runs slightly off, as the meter firmware would assume.
    """
    same_rate = math.isclose(w.fs, spec.fs_meter, rel_tol=1e-12)
    if w.source is None and not same_rate and w.fs < 4 * spec.fs_meter:
        raise ValueError(
            f"source rate {w.fs} Hz is too low to model a {spec.fs_meter} Hz meter front end")
    gain, rate = instance_perturbation(spec, instance_seed)
    aaf = _design_cached(spec.aaf, float(w.fs)) if spec.aaf is not None else None
    if aaf is None and same_rate and rate == 1.0:
        sampled = w
    else:
        n_out = int(round(w.duration * spec.fs_meter))
        sampled = resample(w, spec.fs_meter * rate, aaf, n_out=n_out)
    samples = sampled.samples * gain if gain != 1.0 else sampled.samples
    return Waveform(samples, spec.fs_meter, w.start_time)


def meter_thd(w_acquired: Waveform, method: ThdMethod, f_c: float = 50.0) -> float:
    method = ThdMethod(method)
    s = dft_integer_cycles(w_acquired, f_c, 10)
    top = max_harmonic_for(w_acquired.fs, f_c)
    if method is ThdMethod.SUBGROUPED:
        return thd_subgrouped(harmonic_groups(s, f_c, top), top)
    if method is ThdMethod.RESIDUAL_RATIO:
        g1 = harmonic_groups(s, f_c, 1).fundamental
        if not g1 > FUNDAMENTAL_FLOOR * float(s.bin_values.max()):
            raise ValueError("fundamental subgroup is zero")
        total = float(np.sum(s.bin_values**2))
        return math.sqrt(max(total - g1 * g1, 0.0)) / g1
    c = s.bin_values
    n = s.window_cycles
    if not c[n] > FUNDAMENTAL_FLOOR * float(c.max()):
        raise ValueError("fundamental bin is zero")
    return float(math.sqrt(np.sum(c[2 * n: top * n + 1: n] ** 2)) / c[n])


def meter_frequency(w_acquired: Waveform, spec: MeterModelSpec, interval: float = 10.0) -> float:
    if spec.freq_method is FreqMethod.REFERENCE:
        return fundamental_frequency(w_acquired, spec.f_c, interval)
    if w_acquired.duration + 0.5 / w_acquired.fs < interval:
        raise ValueError(f"need {interval} s of signal, have {w_acquired.duration:.3f} s")
    filt = _design_cached(spec.freq_filter, float(w_acquired.fs))
    lead = min(1.0, max(0.0, w_acquired.duration - interval))
    n_lead = int(round(lead * w_acquired.fs))
    n_total = n_lead + int(round(interval * w_acquired.fs))
    y = filter_array(filt, w_acquired.samples[:n_total], "zero_state")
    return count_cycles_frequency(y[n_lead:], w_acquired.fs)


def read_meter(w_source: Waveform, spec: MeterModelSpec, instance: int = 0, phase: int = 0,
               cfg: Optional[FlickermeterConfig] = None, master_seed: int = 0) -> MeterReadings:
    if not 0 <= instance < spec.n_instances or not 0 <= phase < spec.n_phases:
        raise IndexError(f"{spec.model_id}: instance/phase ({instance}, {phase}) out of range")
    cfg = cfg or default_flickermeter()
    seed = derive_seed(master_seed, spec.model_id, instance, phase)
    w = acquire(w_source, spec, seed)
    pst = flicker_pst(w, cfg)
    body = w.trimmed(cfg.settle) if w.duration > cfg.settle + 10.0 else w
    return MeterReadings(
        pst=pst,
        thd=meter_thd(body, spec.thd_method, spec.f_c),
        f_meas=meter_frequency(body, spec),
        u_rms=aggregate_rms(body, spec.f_c),
        instance_id=instance,
        phase_id=phase,
    )
