"""CSV serialization, characteristic plots and verification summaries."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
from matplotlib.backends.backend_svg import FigureCanvasSVG  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402
import numpy as np  # noqa: E402

from .campaign import (  # noqa: E402
    INDICATORS,
    Envelope,
    LimitSet,
    Status,
    SweepPoint,
    SweepResult,
    Verdict,
)
from .reference import ReferenceReadings  # noqa: E402
from .signals import Waveform  # noqa: E402

PLOT_NAMES = {"pst": "pst_vs_fi", "thd": "thd_vs_fi", "f": "fc_vs_fi", "rms": "rms_vs_fi"}
PLOT_EXT = ".svg"
_LABELS = {
    "pst": "Pst", "thd": "THD (%)", "f": "fundamental frequency (Hz)", "rms": "rms voltage (V)",
}
_SCALE = {"pst": 1.0, "thd": 100.0, "f": 1.0, "rms": 1.0}


@dataclass
class ReportBundle:
    csv_path: Optional[Path] = None
    plot_paths: Dict[str, Path] = field(default_factory=dict)
    summary: Dict = field(default_factory=dict)
    summary_path: Optional[Path] = None


# --- CSV -------------------------------------------------------------------

def csv_header(model_ids: Sequence[str]) -> List[str]:
    cols = ["f_i"] + [f"ref.{ind}" for ind in INDICATORS]
    for m in model_ids:
        for ind in INDICATORS:
            cols += [f"{m}.{ind}_min", f"{m}.{ind}_max"]
        cols += [f"{m}.verdict_{ind}" for ind in INDICATORS]
    return cols


def _num(x: float) -> str:
    return repr(float(x))


def csv_rows(result: SweepResult) -> List[List[str]]:
    rows = []
    for p in result.points:
        ref = p.reference
        row = [_num(p.f_i)]
        row += [_num(getattr(ref, f) if ref else math.nan)
                for f in ("pst", "thd", "f_meas", "u_rms")]
        for m in result.model_ids:
            env = p.envelopes.get(m)
            for ind in INDICATORS:
                row += [_num(env.lo[ind]), _num(env.hi[ind])] if env else ["nan", "nan"]
            verdicts = p.verdicts.get(m, {})
            row += [verdicts[ind].status.value if ind in verdicts else Status.ERROR.value
                    for ind in INDICATORS]
        rows.append(row)
    return rows


def write_csv(result: SweepResult, path) -> ReportBundle:
    path = Path(path)
    lines = [",".join(csv_header(result.model_ids))]
    lines += [",".join(r) for r in csv_rows(result)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return ReportBundle(csv_path=path)


def read_csv(path, limits: LimitSet = LimitSet()) -> SweepResult:
    """Parse a file written by :func:`write_csv` back into a :class:`SweepResult`.

    Individual readings are not stored in the CSV, so only envelopes and
    verdicts are restored.
    """
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text:
        raise ValueError(f"{path}: empty file")
    header = text[0].split(",")
    if header[:5] != csv_header([])[:5]:
        raise ValueError(f"{path}: not a sweep CSV (header starts {header[:5]})")
    per_model = 4 * 2 + 4
    if (len(header) - 5) % per_model:
        raise ValueError(f"{path}: unexpected column count {len(header)}")
    model_ids = [header[5 + k * per_model].rsplit(".", 1)[0]
                 for k in range((len(header) - 5) // per_model)]
    if csv_header(model_ids) != header:
        raise ValueError(f"{path}: header does not match the sweep layout")
    points = []
    for lineno, line in enumerate(text[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} cells, got {len(cells)}")
        f_i = float(cells[0])
        ref_vals = [float(c) for c in cells[1:5]]
        ref = None if all(math.isnan(v) for v in ref_vals) else ReferenceReadings(*ref_vals)
        point = SweepPoint(f_i, ref)
        pos = 5
        for m in model_ids:
            nums = [float(c) for c in cells[pos: pos + 8]]
            codes = cells[pos + 8: pos + 12]
            pos += per_model
            if not all(math.isnan(v) for v in nums):
                lo = {ind: nums[2 * k] for k, ind in enumerate(INDICATORS)}
                hi = {ind: nums[2 * k + 1] for k, ind in enumerate(INDICATORS)}
                point.envelopes[m] = Envelope(lo, hi, 0)
            point.verdicts[m] = {ind: Verdict(ind, Status(c)) for ind, c in zip(INDICATORS, codes)}
            if Status.ERROR.value in codes:
                point.error = point.error or "error recorded in CSV"
        if ref is None:
            point.error = point.error or "error recorded in CSV"
        points.append(point)
    return SweepResult(points, model_ids, limits)


# --- plots -------------------------------------------------------------------

def plot_series(result: SweepResult, indicator: str) -> Dict:
    """Arrays drawn in one characteristic plot (unscaled indicator units)."""
    return {
        "f_i": result.f_grid,
        "reference": result.column(indicator),
        "bands": {m: (result.column(indicator, m, "lo"), result.column(indicator, m, "hi"))
                  for m in result.model_ids},
        "limits": result.limits.line_values(indicator),
    }


def _render(result: SweepResult, indicator: str, path: Path) -> None:
    series = plot_series(result, indicator)
    k = _SCALE[indicator]
    fig = Figure(figsize=(7.0, 4.0))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot(1, 1, 1)
    x = series["f_i"]
    colors = ["tab:orange", "tab:green", "tab:red", "tab:purple", "tab:brown", "tab:pink"]
    for j, (m, (lo, hi)) in enumerate(series["bands"].items()):
        c = colors[j % len(colors)]
        ax.fill_between(x, lo * k, hi * k, color=c, alpha=0.35, linewidth=0, label=f"{m} min-max")
        ax.plot(x, hi * k, color=c, linewidth=0.6)
        ax.plot(x, lo * k, color=c, linewidth=0.6)
    ax.plot(x, series["reference"] * k, color="black", linewidth=1.2, label="reference")
    for j, lim in enumerate(series["limits"]):
        ax.axhline(lim * k, color="tab:blue", linestyle="--", linewidth=0.9,
                   label="limit" if j == 0 else None)
    ax.set_xlabel("frequency of additional component f_i (Hz)")
    ax.set_ylabel(_LABELS[indicator])
    ax.grid(True, linewidth=0.3)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})


def emit_plots(result: SweepResult, out_dir) -> Dict[str, Path]:
    if not result.points:
        raise ValueError("nothing to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    with matplotlib.rc_context({"svg.hashsalt": "meterbench", "svg.fonttype": "none"}):
        for ind in INDICATORS:
            path = out_dir / (PLOT_NAMES[ind] + PLOT_EXT)
            _render(result, ind, path)
            paths[ind] = path
    return paths


# --- summary -------------------------------------------------------------------

def _ranges(values: Sequence[float], flags: Sequence[bool]) -> List[Tuple[float, float]]:
    out, start, prev = [], None, None
    for v, flag in zip(values, flags):
        if flag and start is None:
            start = v
        if not flag and start is not None:
            out.append((start, prev))
            start = None
        prev = v
    if start is not None:
        out.append((start, prev))
    return out


def summarize(result: SweepResult) -> Dict:
    f = [p.f_i for p in result.points]
    models = {}
    for m in result.model_ids:
        total = {s.value: 0 for s in Status}
        by_ind = {}
        ranges = {}
        for ind in INDICATORS:
            counts = {s.value: 0 for s in Status}
            flags = []
            for p in result.points:
                v = p.verdicts.get(m, {}).get(ind)
                status = v.status if v else Status.ERROR
                counts[status.value] += 1
                total[status.value] += 1
                flags.append(status is Status.FALSE_LIMIT_VIOLATION)
            by_ind[ind] = counts
            ranges[ind] = [list(r) for r in _ranges(f, flags)]
        models[m] = {"counts": total, "by_indicator": by_ind, "false_limit_ranges_hz": ranges}
    return {
        "points": len(result.points),
        "indicators": list(INDICATORS),
        "models": models,
        "errors": [{"f_i": p.f_i, "error": p.error} for p in result.points if p.error],
    }


def write_summary(result: SweepResult, path) -> Dict:
    summary = summarize(result)
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary


def format_summary(summary: Dict) -> str:
    lines = [f"{summary['points']} sweep points"]
    for m, body in summary["models"].items():
        counts = ", ".join(f"{k}={v}" for k, v in body["counts"].items() if v)
        lines.append(f"{m}: {counts}")
        for ind, rngs in body["false_limit_ranges_hz"].items():
            if rngs:
                spans = " ".join(f"[{a:g}, {b:g}]" for a, b in rngs)
                lines.append(f"  false {ind} limit violations at f_i (Hz): {spans}")
    if summary["errors"]:
        lines.append(f"{len(summary['errors'])} points reported errors")
    return "\n".join(lines)


def write_report(result: SweepResult, out_dir) -> ReportBundle:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle = write_csv(result, out_dir / "sweep.csv")
    bundle.plot_paths = emit_plots(result, out_dir)
    bundle.summary_path = out_dir / "summary.json"
    bundle.summary = write_summary(result, bundle.summary_path)
    return bundle


# --- waveform files -------------------------------------------------------------

WAVEFORM_MAGIC = "# meterbench-waveform v1"


def waveform_text(w: Waveform) -> str:
    """Text waveform format: ``#`` header lines with fs/length/start_time, then one sample per line."""
    head = (f"{WAVEFORM_MAGIC}\n# fs = {w.fs!r}\n# length = {len(w)}\n"
            f"# start_time = {w.start_time!r}\n")
    return head + "".join(f"{float(v)!r}\n" for v in w.samples)


def write_waveform(w: Waveform, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(waveform_text(w))


def read_waveform(path) -> Waveform:
    header = {}
    samples = []
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != WAVEFORM_MAGIC:
            raise ValueError(f"{path}: not a waveform file (first line {first!r})")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                header[key.strip()] = value.strip()
                continue
            try:
                samples.append(float(line))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad sample {line!r}") from None
    try:
        fs = float(header["fs"])
        length = int(header["length"])
    except KeyError as exc:
        raise ValueError(f"{path}: header lacks {exc}") from None
    if length != len(samples):
        raise ValueError(f"{path}: header announces {length} samples, file holds {len(samples)}")
    return Waveform(np.array(samples), fs, float(header.get("start_time", 0.0)))
