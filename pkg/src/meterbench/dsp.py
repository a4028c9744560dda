"""Numerical building blocks shared by the reference chain and the meter models.

Filters are realized as cascades of second-order sections obtained from
continuous-time prototypes with a prewarped bilinear transform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import interpolate
from scipy import signal as sps

from .signals import Waveform


class FilterKind(str, Enum):
    BUTTERWORTH_LOWPASS = "butterworth_lowpass"
    BUTTERWORTH_HIGHPASS = "butterworth_highpass"
    FIRST_ORDER_LOWPASS = "first_order_lowpass"
    FIRST_ORDER_HIGHPASS = "first_order_highpass"
    RATIONAL_SECTIONS = "rational_sections"


@dataclass(frozen=True)
class AnalogSection:
    """``(b2 s^2 + b1 s + b0) / (a2 s^2 + a1 s + a0)``, coefficients highest power first.

    ``f_warp`` is the frequency (Hz) preserved exactly by the bilinear map; by
    default the natural frequency of the denominator.
    """

    b: Tuple[float, float, float]
    a: Tuple[float, float, float]
    f_warp: Optional[float] = None

    def natural_frequency(self) -> float:
        a2, a1, a0 = self.a
        if a2 != 0:
            return math.sqrt(abs(a0 / a2)) / (2 * math.pi)
        if a1 != 0:
            return abs(a0 / a1) / (2 * math.pi)
        raise ValueError("section denominator has no pole")

    def response(self, f) -> np.ndarray:
        s = 2j * np.pi * np.asarray(f, dtype=float)
        return np.polyval(self.b, s) / np.polyval(self.a, s)


@dataclass(frozen=True)
class AnalogFilterSpec:
    kind: FilterKind
    order: int = 1
    cutoff: float = 1.0
    sections: Tuple[AnalogSection, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", FilterKind(self.kind))
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.kind is FilterKind.RATIONAL_SECTIONS:
            if not self.sections:
                raise ValueError("rational_sections needs explicit sections")
        elif not self.cutoff > 0:
            raise ValueError("cutoff must be positive")

    def analog_sections(self) -> Tuple[AnalogSection, ...]:
        wc = 2 * math.pi * self.cutoff
        kind = self.kind
        if kind is FilterKind.RATIONAL_SECTIONS:
            return self.sections
        if kind is FilterKind.FIRST_ORDER_LOWPASS:
            return (AnalogSection((0.0, 0.0, wc), (0.0, 1.0, wc), self.cutoff),)
        if kind is FilterKind.FIRST_ORDER_HIGHPASS:
            return (AnalogSection((0.0, 1.0, 0.0), (0.0, 1.0, wc), self.cutoff),)
        highpass = kind is FilterKind.BUTTERWORTH_HIGHPASS
        n = self.order
        out = []
        for k in range(n // 2):
            zeta = math.sin(math.pi * (2 * k + 1) / (2 * n))
            a = (1.0, 2 * zeta * wc, wc * wc)
            b = (1.0, 0.0, 0.0) if highpass else (0.0, 0.0, wc * wc)
            out.append(AnalogSection(b, a, self.cutoff))
        if n % 2:
            b = (0.0, 1.0, 0.0) if highpass else (0.0, 0.0, wc)
            out.append(AnalogSection(b, (0.0, 1.0, wc), self.cutoff))
        return tuple(out)

    def analog_response(self, f) -> np.ndarray:
        h = np.ones_like(np.asarray(f, dtype=float), dtype=complex)
        for sec in self.analog_sections():
            h = h * sec.response(f)
        return h


@dataclass(frozen=True, eq=False)
class DigitalFilter:
    """Biquad cascade; each row of ``sos`` is ``b0 b1 b2 1 a1 a2``."""

    sos: np.ndarray
    fs: float
    spec: Optional[AnalogFilterSpec] = field(default=None, repr=False)

    def response(self, f) -> np.ndarray:
        f = np.atleast_1d(np.asarray(f, dtype=float))
        _, h = sps.sosfreqz(self.sos, worN=f, fs=self.fs)
        return h

    def poles(self) -> np.ndarray:
        return np.concatenate([np.roots(row[3:]) for row in self.sos])


def _bilinear_section(sec: AnalogSection, fs: float) -> np.ndarray:
    f_warp = sec.f_warp if sec.f_warp is not None else sec.natural_frequency()
    if not 0 < f_warp < fs / 2:
        raise ValueError(f"corner frequency {f_warp} Hz must lie below fs/2 = {fs / 2} Hz")
    w = 2 * math.pi * f_warp
    k = w / math.tan(w / (2 * fs))
    b2, b1, b0 = sec.b
    a2, a1, a0 = sec.a
    if a2 == 0 and b2 == 0:
        num = np.array([b1 * k + b0, b0 - b1 * k, 0.0])
        den = np.array([a1 * k + a0, a0 - a1 * k, 0.0])
    else:
        kk = k * k
        num = np.array([b2 * kk + b1 * k + b0, 2 * (b0 - b2 * kk), b2 * kk - b1 * k + b0])
        den = np.array([a2 * kk + a1 * k + a0, 2 * (a0 - a2 * kk), a2 * kk - a1 * k + a0])
    if den[0] == 0:
        raise ValueError("degenerate section")
    return np.concatenate([num / den[0], den / den[0]])


def design_filter(spec: AnalogFilterSpec, fs: float) -> DigitalFilter:
    if spec.kind is not FilterKind.RATIONAL_SECTIONS and spec.cutoff >= fs / 2:
        raise ValueError(f"cutoff {spec.cutoff} Hz must lie below fs/2 = {fs / 2} Hz")
    sos = np.array([_bilinear_section(sec, fs) for sec in spec.analog_sections()])
    filt = DigitalFilter(sos, float(fs), spec)
    if np.any(np.abs(filt.poles()) >= 1.0):
        raise ValueError("filter design produced an unstable section")
    return filt


def apply_filter(filt: DigitalFilter, w: Waveform, warmup: str = "zero_state") -> Waveform:
    """Filter a waveform from fresh state.

    ``steady_state_prefill`` initializes every section as if the first sample
    had been applied forever, which removes the start-up step transient.
    """
    if not math.isclose(filt.fs, w.fs, rel_tol=1e-12):
        raise ValueError(f"filter designed at {filt.fs} Hz, waveform sampled at {w.fs} Hz")
    return Waveform(filter_array(filt, w.samples, warmup), w.fs, w.start_time)


def filter_array(filt: DigitalFilter, x: np.ndarray, warmup: str = "zero_state",
                 initial: Optional[float] = None) -> np.ndarray:
    """Filter a raw array; ``initial`` overrides the level assumed held before
    sample 0 in ``steady_state_prefill`` mode (default: the first sample)."""
    if warmup == "zero_state":
        return sps.sosfilt(filt.sos, x)
    if warmup == "steady_state_prefill":
        if initial is None:
            initial = x[0] if len(x) else 0.0
        zi = sps.sosfilt_zi(filt.sos) * initial
        y, _ = sps.sosfilt(filt.sos, x, zi=zi)
        return y
    raise ValueError(f"unknown warmup mode {warmup!r}")


@dataclass(frozen=True)
class Spectrum:
    """Single-sided rms amplitudes on a grid of ``f_c / window_cycles``."""

    bin_values: np.ndarray
    bin_spacing: float
    window_cycles: int

    def frequency(self, k: int) -> float:
        return k * self.bin_spacing


def window_samples(fs: float, f_c: float, window_cycles: int) -> int:
    n_exact = window_cycles * fs / f_c
    n = int(round(n_exact))
    if abs(n - n_exact) > 1e-6 or n < 2:
        raise ValueError(
            f"{window_cycles} cycles of {f_c} Hz is not a whole number of samples at {fs} Hz")
    return n


def window_rms_spectra(x: np.ndarray, n: int) -> np.ndarray:
    """rms amplitude spectra of consecutive ``n``-sample rectangular windows."""
    n_win = x.size // n
    frames = x[: n_win * n].reshape(n_win, n)
    spec = np.abs(np.fft.rfft(frames, axis=1)) / n
    spec[:, 1:] *= math.sqrt(2.0)
    if n % 2 == 0:
        spec[:, -1] /= math.sqrt(2.0)
    return spec


def dft_integer_cycles(w: Waveform, f_c: float, window_cycles: int = 10,
                       max_windows: Optional[int] = None) -> Spectrum:
    """Rectangular-window DFT over whole fundamental cycles.

    Every complete window in the record (or the first ``max_windows``) is
    transformed and the bin amplitudes are aggregated as a quadratic mean.
    """
    n = window_samples(w.fs, f_c, window_cycles)
    if w.samples.size < n:
        raise ValueError(f"record holds {w.samples.size} samples, window needs {n}")
    x = w.samples
    if max_windows is not None:
        x = x[: max_windows * n]
    spectra = window_rms_spectra(x, n)
    values = np.sqrt(np.mean(spectra**2, axis=0))
    return Spectrum(values, f_c / window_cycles, window_cycles)


def resample(w: Waveform, fs_new: float, anti_alias: Optional[DigitalFilter] = None,
             n_out: Optional[int] = None) -> Waveform:
    """Sample ``w`` at instants ``start_time + n / fs_new``.

    Nothing band-limits the signal except ``anti_alias``: components above
    ``fs_new / 2`` that survive it fold down. A closed-form source is
    re-evaluated exactly (through the filter's steady-state response);
    otherwise the filtered record is cubic-interpolated. ``n_out`` fixes the
    output length (the last instants may then extrapolate by a fraction of a
    source sample).
    """
    if not fs_new > 0:
        raise ValueError("fs_new must be positive")
    if anti_alias is not None and not math.isclose(anti_alias.fs, w.fs, rel_tol=1e-12):
        raise ValueError("anti-alias filter must be designed at the source rate")
    t_end = w.samples.size / w.fs
    if n_out is None:
        n_new = int(math.floor((t_end - 1.0 / w.fs) * fs_new + 1e-9)) + 1
    else:
        n_new = int(n_out)
    t_rel = np.arange(n_new) / fs_new
    src = w.source
    if src is not None:
        if anti_alias is not None:
            g_c, g_i = anti_alias.response([src.f_c, src.f_i])
        else:
            g_c = g_i = 1.0
        y = src.evaluate(w.start_time + t_rel, g_c, g_i)
        return Waveform(y, fs_new, w.start_time, source=None)
    x = w.samples
    if anti_alias is not None:
        x = filter_array(anti_alias, x, "steady_state_prefill")
    spline = interpolate.CubicSpline(np.arange(x.size) / w.fs, x)
    return Waveform(spline(t_rel), fs_new, w.start_time)


class CumulativeClassifier:
    """Log-spaced occupancy histogram with inverse-CPF percentile lookup."""

    def __init__(self, lo: float = 1e-6, hi: float = 1e4, n_bins: int = 10_000):
        if not 0 < lo < hi or n_bins < 1:
            raise ValueError("need 0 < lo < hi and n_bins >= 1")
        self.edges = np.geomspace(lo, hi, n_bins + 1)
        self.counts = np.zeros(n_bins, dtype=np.int64)
        self._log_lo = math.log(lo)
        self._log_step = (math.log(hi) - math.log(lo)) / n_bins

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def add(self, values: Sequence[float]) -> None:
        v = np.asarray(values, dtype=float)
        with np.errstate(divide="ignore"):
            idx = np.floor((np.log(np.maximum(v, 1e-300)) - self._log_lo) / self._log_step)
        idx = np.clip(idx, 0, self.counts.size - 1).astype(np.int64)
        self.counts += np.bincount(idx, minlength=self.counts.size)

    def bin_width_at(self, value: float) -> float:
        k = int(np.clip(np.searchsorted(self.edges, value, side="right") - 1, 0, self.counts.size - 1))
        return float(self.edges[k + 1] - self.edges[k])

    def percentile(self, p: float) -> float:
        """Level exceeded during ``p`` percent of the observation time."""
        return classifier_percentile(self, p)


def classifier_percentile(c: CumulativeClassifier, p: float) -> float:
    total = c.total
    if total == 0:
        raise ValueError("classifier is empty")
    if not 0 < p < 100:
        raise ValueError("p must lie in (0, 100)")
    target = (1.0 - p / 100.0) * total
    cum = np.cumsum(c.counts)
    k = int(np.searchsorted(cum, target, side="left"))
    k = min(k, c.counts.size - 1)
    below = cum[k - 1] if k > 0 else 0
    frac = (target - below) / c.counts[k] if c.counts[k] else 0.0
    lo, hi = c.edges[k], c.edges[k + 1]
    return float(lo + frac * (hi - lo))
