"""Frequency-sweep verification campaigns.

For every frequency of the additional component the stimulus is synthesized
once, read by the reference chain, then by every instance and phase of every
meter model. The per-model readings are reduced to min/max envelopes and
compared with the reference through confidence-interval overlap and the
network limits.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .meters import PRESETS, MeterModelSpec, MeterReadings, read_meter
from .reference import FlickermeterConfig, ReferenceReadings, analyze, calibrate_flickermeter
from .signals import SamplingSpec, TestSignalParams, make_phases

log = logging.getLogger(__name__)

DEFAULT_SEED = 0
INDICATORS = ("pst", "thd", "f", "rms")
_FIELD = {"pst": "pst", "thd": "thd", "f": "f_meas", "rms": "u_rms"}


class Status(str, Enum):
    CONSISTENT = "consistent"
    INCONSISTENT = "inconsistent"
    FALSE_LIMIT_VIOLATION = "false_limit_violation"
    MISSED_LIMIT_VIOLATION = "missed_limit_violation"
    ERROR = "error"


# Worst first; a model's verdict at a point is the worst over its readings.
_PRECEDENCE = (Status.ERROR, Status.FALSE_LIMIT_VIOLATION, Status.MISSED_LIMIT_VIOLATION,
               Status.INCONSISTENT, Status.CONSISTENT)


@dataclass(frozen=True)
class Verdict:
    indicator: str
    status: Status


@dataclass(frozen=True)
class LimitSet:
    pst_limit: float = 1.0
    f_band: Tuple[float, float] = (49.5, 50.5)
    thd_limit: float = 0.08
    f_nominal: float = 50.0

    def __post_init__(self):
        lo, hi = self.f_band
        if not lo < self.f_nominal < hi:
            raise ValueError("frequency band must bracket the nominal frequency")
        if not (self.pst_limit > 0 and self.thd_limit > 0):
            raise ValueError("limits must be positive")

    def beyond(self, indicator: str, value: float) -> bool:
        if indicator == "pst":
            return value > self.pst_limit
        if indicator == "thd":
            return value > self.thd_limit
        if indicator == "f":
            return not self.f_band[0] <= value <= self.f_band[1]
        return False

    def line_values(self, indicator: str) -> Tuple[float, ...]:
        return {"pst": (self.pst_limit,), "thd": (self.thd_limit,), "f": tuple(self.f_band)}.get(
            indicator, ())


@dataclass(frozen=True)
class TolerancePolicy:
    """Confidence half-widths; ``rms`` entries are relative to the value."""

    reference: Mapping[str, float] = field(
        default_factory=lambda: {"pst": 0.05, "thd": 0.002, "f": 0.01, "rms": 0.001})
    meter: Mapping[str, float] = field(
        default_factory=lambda: {"pst": 0.1, "thd": 0.01, "f": 0.05, "rms": 0.005})

    def halfwidth(self, side: str, indicator: str, value: float) -> float:
        table = self.reference if side == "reference" else self.meter
        hw = table[indicator]
        return hw * abs(value) if indicator == "rms" else hw


def verdict(ref_value: float, meter_value: float, indicator: str,
            limits: LimitSet = LimitSet(), tolerance: TolerancePolicy = TolerancePolicy()) -> Verdict:
    """Classify one meter reading against the reference.

    Limit statuses take precedence over plain (in)consistency.
    """
    if not (math.isfinite(ref_value) and math.isfinite(meter_value)):
        return Verdict(indicator, Status.ERROR)
    meter_out = limits.beyond(indicator, meter_value)
    ref_out = limits.beyond(indicator, ref_value)
    if meter_out and not ref_out:
        return Verdict(indicator, Status.FALSE_LIMIT_VIOLATION)
    if ref_out and not meter_out:
        return Verdict(indicator, Status.MISSED_LIMIT_VIOLATION)
    allowed = (tolerance.halfwidth("reference", indicator, ref_value)
               + tolerance.halfwidth("meter", indicator, meter_value))
    if abs(meter_value - ref_value) <= allowed:
        return Verdict(indicator, Status.CONSISTENT)
    return Verdict(indicator, Status.INCONSISTENT)


def worst(statuses: Sequence[Status]) -> Status:
    present = set(statuses)
    for s in _PRECEDENCE:
        if s in present:
            return s
    raise ValueError("no statuses given")


@dataclass(frozen=True)
class Envelope:
    lo: Dict[str, float]
    hi: Dict[str, float]
    count: int


def envelope(readings: Sequence[MeterReadings]) -> Envelope:
    if not readings:
        raise ValueError("cannot take the envelope of no readings")
    lo, hi = {}, {}
    for ind in INDICATORS:
        vals = [getattr(r, _FIELD[ind]) for r in readings]
        lo[ind], hi[ind] = min(vals), max(vals)
    return Envelope(lo, hi, len(readings))


def reading_value(r, indicator: str) -> float:
    return getattr(r, _FIELD[indicator])


@dataclass
class SweepConfig:
    signal: TestSignalParams = field(default_factory=lambda: TestSignalParams(duration=65.0))
    grid: Tuple[float, ...] = tuple(np.arange(10.0, 2000.0 + 2.5, 5.0))
    sampling: SamplingSpec = field(default_factory=SamplingSpec)
    models: List[MeterModelSpec] = field(default_factory=lambda: list(PRESETS.values()))
    master_seed: int = DEFAULT_SEED
    limits: LimitSet = field(default_factory=LimitSet)
    tolerance: TolerancePolicy = field(default_factory=TolerancePolicy)
    observation_window: float = 60.0
    settle: float = 5.0
    workers: int = 1

    def __post_init__(self):
        self.grid = tuple(float(f) for f in self.grid)
        self.validate()

    @property
    def flickermeter(self) -> FlickermeterConfig:
        return FlickermeterConfig(f_nominal=self.signal.f_c,
                                  observation_window=self.observation_window, settle=self.settle)

    def validate(self) -> None:
        if not self.grid:
            raise ValueError("f_i grid is empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("f_i grid must be strictly increasing")
        if self.signal.duration + 1e-9 < self.observation_window + self.settle:
            raise ValueError(
                f"duration {self.signal.duration} s is shorter than flicker window "
                f"{self.observation_window} s + settle {self.settle} s")
        if self.sampling.fs <= 2 * 40 * self.signal.f_c:
            raise ValueError("reference rate must cover the 40th harmonic")
        if self.sampling.fs <= 2 * self.grid[-1]:
            raise ValueError(f"reference rate {self.sampling.fs} Hz cannot carry f_i = {self.grid[-1]} Hz")
        ids = [m.model_id for m in self.models]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate meter model ids: {ids}")


@dataclass
class SweepPoint:
    f_i: float
    reference: Optional[ReferenceReadings]
    envelopes: Dict[str, Envelope] = field(default_factory=dict)
    verdicts: Dict[str, Dict[str, Verdict]] = field(default_factory=dict)
    readings: Dict[str, List[MeterReadings]] = field(default_factory=dict)
    error: Optional[str] = None


@dataclass
class SweepResult:
    points: List[SweepPoint]
    model_ids: List[str]
    limits: LimitSet = field(default_factory=LimitSet)

    def column(self, indicator: str, model_id: Optional[str] = None, side: str = "ref") -> np.ndarray:
        """Reference trace (``model_id=None``) or one envelope edge (``side`` lo/hi)."""
        out = []
        for p in self.points:
            if model_id is None:
                out.append(reading_value(p.reference, indicator) if p.reference else math.nan)
            else:
                env = p.envelopes.get(model_id)
                out.append(getattr(env, side)[indicator] if env else math.nan)
        return np.array(out)

    @property
    def f_grid(self) -> np.ndarray:
        return np.array([p.f_i for p in self.points])


@lru_cache(maxsize=8)
def _calibrated(cfg: FlickermeterConfig, fs: float) -> FlickermeterConfig:
    return calibrate_flickermeter(cfg, fs)


def evaluate_point(cfg: SweepConfig, f_i: float) -> SweepPoint:
    """One sweep point; failures are captured in ``SweepPoint.error``."""
    fm = _calibrated(cfg.flickermeter, cfg.sampling.fs)
    try:
        params = cfg.signal.replace(f_i=f_i)
        n_phases = max([m.n_phases for m in cfg.models] + [1])
        phases = make_phases(params, cfg.sampling, n_phases)
    except ValueError as exc:
        return SweepPoint(f_i, None, error=f"E_SYNTH: {exc}")
    try:
        ref = analyze(phases[0], fm)
    except (ValueError, RuntimeError) as exc:
        return SweepPoint(f_i, None, error=f"E_REFERENCE: {exc}")
    point = SweepPoint(f_i, ref)
    for spec in cfg.models:
        try:
            rs = [read_meter(phases[ph], spec, inst, ph, fm, cfg.master_seed)
                  for inst in range(spec.n_instances) for ph in range(spec.n_phases)]
        except (ValueError, RuntimeError) as exc:
            point.error = f"E_METER[{spec.model_id}]: {exc}"
            point.verdicts[spec.model_id] = {ind: Verdict(ind, Status.ERROR) for ind in INDICATORS}
            continue
        point.readings[spec.model_id] = rs
        point.envelopes[spec.model_id] = envelope(rs)
        point.verdicts[spec.model_id] = {
            ind: Verdict(ind, worst([
                verdict(reading_value(ref, ind), reading_value(r, ind), ind,
                        cfg.limits, cfg.tolerance).status for r in rs]))
            for ind in INDICATORS
        }
    return point


def _evaluate_star(args):
    return evaluate_point(*args)


def run_sweep(cfg: SweepConfig, workers: Optional[int] = None,
              progress: Optional[Callable[[int, int], None]] = None) -> SweepResult:
    """Evaluate every grid point; result order follows the grid."""
    cfg.validate()
    workers = cfg.workers if workers is None else workers
    if workers <= 0:
        workers = os.cpu_count() or 1
    jobs = [(cfg, f) for f in cfg.grid]
    points: List[SweepPoint] = []
    if workers == 1 or len(jobs) == 1:
        for k, job in enumerate(jobs):
            points.append(_evaluate_star(job))
            if progress:
                progress(k + 1, len(jobs))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for k, p in enumerate(pool.map(_evaluate_star, jobs, chunksize=1)):
                points.append(p)
                if progress:
                    progress(k + 1, len(jobs))
    for p in points:
        if p.error:
            log.warning("f_i = %g Hz: %s", p.f_i, p.error)
    return SweepResult(points, [m.model_id for m in cfg.models], cfg.limits)


def strict_600s(cfg: SweepConfig) -> SweepConfig:
    """Standard 10-minute flicker window (and a record long enough to hold it)."""
    duration = max(cfg.signal.duration, 600.0 + cfg.settle)
    return replace(cfg, observation_window=600.0, signal=cfg.signal.replace(duration=duration))
