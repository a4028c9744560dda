"""Campaign configuration files (TOML, ``schema_version = 1``).

Layout::

    schema_version = 1

    [signal]                 # u_c, f_c, u_i_star, phi_c, phi_i
    [sweep]                  # start, stop, step | points; duration, seed, workers
    [reference]              # fs, quantizer_bits, observation_window, settle
    [limits]                 # pst, thd, f_band = [lo, hi]
    [tolerance.reference]    # pst, thd, f, rms (rms relative)
    [tolerance.meter]
    [[meters]]               # preset = "EM-A" and/or explicit MeterModelSpec fields

Every section is optional. Without any ``[[meters]]`` the shipped presets are
used; ``meters = []`` gives a reference-only campaign. Overrides are dotted
paths such as ``sweep.step=2.5`` or ``meters.0.fs_meter=3200``.
"""
from __future__ import annotations

import copy
import re
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

import numpy as np
import tomli

from .campaign import DEFAULT_SEED, LimitSet, SweepConfig, TolerancePolicy
from .dsp import AnalogFilterSpec, AnalogSection
from .meters import PRESETS, MeterModelSpec, get_preset
from .signals import SamplingSpec, TestSignalParams

SCHEMA_VERSION = 1

_SECTIONS = {
    "signal": {"u_c", "f_c", "u_i_star", "phi_c", "phi_i"},
    "sweep": {"start", "stop", "step", "points", "duration", "seed", "workers"},
    "reference": {"fs", "quantizer_bits", "observation_window", "settle"},
    "limits": {"pst", "thd", "f_band"},
    "tolerance": {"reference", "meter"},
}
_TOL_KEYS = {"pst", "thd", "f", "rms"}
_METER_KEYS = {
    "preset", "model_id", "fs_meter", "aaf", "thd_method", "freq_method", "freq_filter",
    "flicker_method", "gain_spread", "rate_spread", "n_instances", "n_phases", "description",
}
_FILTER_KEYS = {"kind", "order", "cutoff", "sections"}


class ConfigError(ValueError):
    pass


def _line_of(text: Optional[str], key: str) -> str:
    if not text:
        return ""
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for n, line in enumerate(text.splitlines(), start=1):
        if pat.match(line):
            return f" (line {n})"
    return ""


def _check_keys(table: Dict, allowed: Iterable[str], where: str, text: Optional[str]) -> None:
    if not isinstance(table, dict):
        raise ConfigError(f"{where}: expected a table")
    for key in table:
        if key not in allowed:
            full = f"{where}.{key}" if where else key
            raise ConfigError(f"unknown config key '{full}'{_line_of(text, key)}")


def _filter_from(d: Optional[Dict], where: str, text: Optional[str]) -> Optional[AnalogFilterSpec]:
    if d is None or d == "none":
        return None
    _check_keys(d, _FILTER_KEYS, where, text)
    sections = tuple(AnalogSection(tuple(s["b"]), tuple(s["a"]), s.get("f_warp"))
                     for s in d.get("sections", ()))
    return AnalogFilterSpec(d["kind"], int(d.get("order", 1)), float(d.get("cutoff", 1.0)), sections)


def _meter_from(d: Dict, k: int, text: Optional[str]) -> MeterModelSpec:
    where = f"meters.{k}"
    _check_keys(d, _METER_KEYS, where, text)
    d = dict(d)
    base = get_preset(d.pop("preset")) if "preset" in d else None
    for key in ("aaf", "freq_filter"):
        if key in d:
            d[key] = _filter_from(d[key], f"{where}.{key}", text)
    if base is None:
        if "model_id" not in d or "fs_meter" not in d:
            raise ConfigError(f"{where}: needs 'preset' or both 'model_id' and 'fs_meter'")
        return MeterModelSpec(**d)
    return replace(base, **d)


def build_config(data: Dict[str, Any], text: Optional[str] = None) -> SweepConfig:
    """Turn a parsed document into a validated :class:`SweepConfig`."""
    data = dict(data)
    version = data.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    _check_keys(data, set(_SECTIONS) | {"meters"}, "", text)
    for name, allowed in _SECTIONS.items():
        _check_keys(data.get(name, {}), allowed, name, text)
    tol = data.get("tolerance", {})
    for side in ("reference", "meter"):
        _check_keys(tol.get(side, {}), _TOL_KEYS, f"tolerance.{side}", text)

    try:
        sig = data.get("signal", {})
        sweep = data.get("sweep", {})
        ref = data.get("reference", {})
        window = float(ref.get("observation_window", 60.0))
        settle = float(ref.get("settle", 5.0))
        params = TestSignalParams(duration=float(sweep.get("duration", window + settle)),
                                  **{k: float(v) for k, v in sig.items()})
        if "points" in sweep:
            if {"start", "stop", "step"} & set(sweep):
                raise ConfigError("sweep: give either 'points' or start/stop/step, not both")
            grid = [float(f) for f in sweep["points"]]
        else:
            start = float(sweep.get("start", 10.0))
            stop = float(sweep.get("stop", 2000.0))
            step = float(sweep.get("step", 5.0))
            if step <= 0:
                raise ConfigError("sweep.step must be positive")
            grid = list(np.arange(start, stop + step / 2, step))
        lim = data.get("limits", {})
        limits = LimitSet(pst_limit=float(lim.get("pst", 1.0)),
                          f_band=tuple(float(v) for v in lim.get("f_band", (49.5, 50.5))),
                          thd_limit=float(lim.get("thd", 0.08)),
                          f_nominal=params.f_c)
        defaults = TolerancePolicy()
        tolerance = TolerancePolicy(
            reference={**defaults.reference, **tol.get("reference", {})},
            meter={**defaults.meter, **tol.get("meter", {})},
        )
        if "meters" in data:
            if not isinstance(data["meters"], list):
                raise ConfigError("meters: expected an array of tables")
            models = [_meter_from(m, k, text) for k, m in enumerate(data["meters"])]
        else:
            models = list(PRESETS.values())
        bits = ref.get("quantizer_bits")
        return SweepConfig(
            signal=params,
            grid=grid,
            sampling=SamplingSpec(float(ref.get("fs", 10_000.0)), None if bits is None else int(bits)),
            models=models,
            master_seed=int(sweep.get("seed", DEFAULT_SEED)),
            limits=limits,
            tolerance=tolerance,
            observation_window=window,
            settle=settle,
            workers=int(sweep.get("workers", 1)),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def parse_value(raw: str) -> Any:
    try:
        return tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        return raw


def apply_overrides(data: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    data = copy.deepcopy(data)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        path, raw = item.split("=", 1)
        keys = path.strip().split(".")
        if keys[0] == "meters" and "meters" not in data:
            data["meters"] = [{"preset": name} for name in PRESETS]
        node: Any = data
        try:
            for key in keys[:-1]:
                if isinstance(node, list):
                    node = node[int(key)]
                    continue
                node = node.setdefault(key, {})
            last = keys[-1]
            if isinstance(node, list):
                node[int(last)] = parse_value(raw)
            else:
                node[last] = parse_value(raw)
        except (IndexError, ValueError, AttributeError, TypeError) as exc:
            raise ConfigError(f"override {item!r} does not address a config field") from exc
    return data


def load_document(path) -> tuple:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return tomli.loads(text), text
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(path=None, overrides: Iterable[str] = ()) -> SweepConfig:
    if path is None:
        data, text = {"schema_version": SCHEMA_VERSION}, None
    else:
        data, text = load_document(path)
    overrides = list(overrides)
    if overrides:
        data = apply_overrides(data, overrides)
    try:
        return build_config(data, text)
    except ConfigError as exc:
        if path is not None:
            raise ConfigError(f"{path}: {exc}") from exc
        raise


DEMO_CONFIG = """\
schema_version = 1

[signal]
u_c = 230.0
f_c = 50.0
u_i_star = 0.05

[sweep]
start = 1500.0
stop = 1600.0
step = 5.0
seed = 0

[reference]
fs = 10000.0
observation_window = 60.0
settle = 5.0

[limits]
pst = 1.0
thd = 0.08
f_band = [49.5, 50.5]

[[meters]]
preset = "EM-A"

[[meters]]
preset = "EM-B"

[[meters]]
preset = "EM-C"
"""
