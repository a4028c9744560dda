"""Two-tone test stimulus and its per-phase replication.

The stimulus is a fundamental of rms ``u_c`` at ``f_c`` plus one additional
component (sub-, inter- or harmonic) whose rms is ``u_i_star * u_c``::

    u(t) = sqrt(2) * u_c * (cos(2 pi f_c t + phi_c) + u_i_star * cos(2 pi f_i t + phi_i))
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

DEFAULT_U_C = 230.0
DEFAULT_F_C = 50.0
DEFAULT_FS = 10_000.0


@dataclass(frozen=True)
class TestSignalParams:
    __test__ = False  # keep pytest from collecting this as a test class

    u_c: float = DEFAULT_U_C
    f_c: float = DEFAULT_F_C
    u_i_star: float = 0.05
    f_i: float = 0.0
    duration: float = 1.0
    phi_c: float = 0.0
    phi_i: float = 0.0

    def __post_init__(self):
        for name in ("u_c", "f_c", "u_i_star", "f_i", "duration", "phi_c", "phi_i"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.u_c <= 0 or self.f_c <= 0 or self.duration <= 0:
            raise ValueError("u_c, f_c and duration must be positive")
        if self.f_i < 0:
            raise ValueError("f_i must be non-negative")
        if not 0 <= self.u_i_star < 1:
            raise ValueError("u_i_star must lie in [0, 1)")

    def replace(self, **changes) -> "TestSignalParams":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return TestSignalParams(**values)

    def evaluate(self, t: np.ndarray, gain_c: complex = 1.0, gain_i: complex = 1.0) -> np.ndarray:
        """Evaluate the stimulus at arbitrary instants.

        ``gain_c`` and ``gain_i`` are complex steady-state responses applied to
        the fundamental and the additional tone (used to model a linear
        front-end filter without running it sample by sample).
        """
        t = np.asarray(t, dtype=float)
        amp = math.sqrt(2.0) * self.u_c
        ph_c = 2.0 * np.pi * self.f_c * t + self.phi_c + np.angle(gain_c)
        out = (amp * abs(gain_c)) * np.cos(ph_c)
        if self.u_i_star > 0.0:
            ph_i = 2.0 * np.pi * self.f_i * t + self.phi_i + np.angle(gain_i)
            out += (amp * self.u_i_star * abs(gain_i)) * np.cos(ph_i)
        return out


@dataclass(frozen=True)
class SamplingSpec:
    fs: float = DEFAULT_FS
    quantizer_bits: Optional[int] = None

    def __post_init__(self):
        if not (math.isfinite(self.fs) and self.fs > 0):
            raise ValueError("fs must be positive and finite")
        if self.quantizer_bits is not None and not 8 <= self.quantizer_bits <= 24:
            raise ValueError("quantizer_bits must lie in [8, 24]")


@dataclass(frozen=True, eq=False)
class Waveform:
    """Uniformly sampled real signal.

    ``source`` keeps the closed-form description when the samples came
    straight from :func:`synth_two_tone`; resampling uses it to re-evaluate
    the signal exactly instead of interpolating.
    """

    samples: np.ndarray
    fs: float
    start_time: float = 0.0
    source: Optional[TestSignalParams] = field(default=None, repr=False)

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float)
        if arr.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        if not self.fs > 0:
            raise ValueError("fs must be positive")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.fs

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.samples.size) / self.fs

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples**2)))

    def scaled(self, factor: float) -> "Waveform":
        return Waveform(self.samples * factor, self.fs, self.start_time)

    def trimmed(self, seconds: float) -> "Waveform":
        """Drop the first ``seconds`` of the record."""
        n = int(round(seconds * self.fs))
        if n >= self.samples.size:
            raise ValueError("trim removes the whole record")
        return Waveform(self.samples[n:], self.fs, self.start_time + n / self.fs,
                        source=self.source)


def quantize(x: np.ndarray, bits: int, full_scale: float) -> np.ndarray:
    """Mid-tread uniform quantizer over [-full_scale, full_scale]."""
    step = 2.0 * full_scale / (2**bits)
    levels = 2 ** (bits - 1)
    q = np.clip(np.round(x / step), -levels, levels - 1)
    return q * step


def synth_two_tone(params: TestSignalParams, sampling: SamplingSpec = SamplingSpec(),
                   start_time: float = 0.0) -> Waveform:
    """Sample the two-tone stimulus at ``sampling.fs``."""
    if sampling.fs <= 2.0 * params.f_i:
        raise ValueError(
            f"fs={sampling.fs} Hz cannot represent f_i={params.f_i} Hz without aliasing")
    if sampling.fs <= 2.0 * params.f_c:
        raise ValueError(f"fs={sampling.fs} Hz is below Nyquist for f_c={params.f_c} Hz")
    n = int(round(params.duration * sampling.fs))
    t = start_time + np.arange(n) / sampling.fs
    x = params.evaluate(t)
    if sampling.quantizer_bits is not None:
        x = quantize(x, sampling.quantizer_bits, 4.0 * math.sqrt(2.0) * params.u_c)
        return Waveform(x, sampling.fs, start_time)
    return Waveform(x, sampling.fs, start_time, source=params)


def make_phases(params: TestSignalParams, sampling: SamplingSpec = SamplingSpec(),
                n_phases: int = 3) -> Sequence[Waveform]:
    """One waveform per phase; every phase is driven by the same signal."""
    if n_phases < 1:
        raise ValueError("n_phases must be at least 1")
    w = synth_two_tone(params, sampling)
    return [w] * n_phases
