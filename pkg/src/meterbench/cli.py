"""Command-line entry point.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.
Diagnostics go to stderr; readings go to stdout or files.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from . import __version__
from .campaign import DEFAULT_SEED, run_sweep, strict_600s
from .config import DEMO_CONFIG, ConfigError, load_config
from .meters import IDEAL, PRESETS, get_preset, read_meter
from .reference import analyze, calibrate_flickermeter, FlickermeterConfig
from .report import format_summary, read_csv, read_waveform, waveform_text, write_report, write_waveform
from .report import emit_plots, write_summary
from .signals import SamplingSpec, TestSignalParams, synth_two_tone

log = logging.getLogger("meterbench")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _signal_flags(p: argparse.ArgumentParser, duration_default: Optional[float] = None) -> None:
    g = p.add_argument_group("test signal")
    g.add_argument("--uc", type=float, default=230.0, help="fundamental rms U_c in V (default 230)")
    g.add_argument("--fc", type=float, default=50.0, help="fundamental frequency f_c in Hz (default 50)")
    g.add_argument("--ui", type=float, default=0.05,
                   help="relative rms u_i* of the additional component (default 0.05)")
    g.add_argument("--fi", type=float, default=0.0,
                   help="frequency f_i of the additional component in Hz (default 0)")
    g.add_argument("--phi-c", type=float, default=0.0, help="fundamental initial phase in rad")
    g.add_argument("--phi-i", type=float, default=0.0, help="additional component initial phase in rad")
    g.add_argument("--duration", type=float, default=duration_default,
                   help="record length in s (default: flicker window + settle)")
    g.add_argument("--fs", type=float, default=10_000.0, help="sampling rate in Hz (default 10000)")
    g.add_argument("--bits", type=int, default=None,
                   help="quantizer bit depth, 8-24 (default: ideal samples)")


def _flicker_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", type=float, default=60.0,
                   help="flicker observation window in s (default 60, desk scale)")
    p.add_argument("--strict-600s", action="store_true",
                   help="use the standard 600 s flicker observation window")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="meterbench", description="Smart-meter power-quality verification bench.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser,
                                help="run 'meterbench COMMAND --help' for details")

    p = sub.add_parser("synth", help="write a two-tone test waveform file")
    _signal_flags(p, 1.0)
    p.add_argument("--out", default="-", help="destination file ('-' for stdout)")

    p = sub.add_parser("analyze", help="print reference readings for a waveform")
    p.add_argument("--input", help="waveform file written by 'synth' (default: synthesize)")
    _signal_flags(p)
    _flicker_flags(p)

    p = sub.add_parser("simulate", help="print the readings of one simulated meter")
    p.add_argument("--preset", default="EM-A",
                   help=f"meter model: {', '.join(list(PRESETS) + [IDEAL.model_id])} "
                        "or a model_id from --config")
    p.add_argument("--config", help="campaign config file providing extra meter models")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted config override, repeatable")
    p.add_argument("--instance", type=int, default=None, help="meter instance (default: all)")
    p.add_argument("--phase", type=int, default=None, help="meter phase (default: all)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                   help=f"master seed for instance spread (default {DEFAULT_SEED})")
    _signal_flags(p)
    _flicker_flags(p)

    p = sub.add_parser("sweep", help="run a verification campaign and write the report")
    p.add_argument("--config", help="campaign config file (default: built-in defaults)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted config override, e.g. sweep.step=2.5; repeatable")
    p.add_argument("--out", default="results", help="output directory (default ./results)")
    p.add_argument("--seed", type=int, default=None,
                   help=f"master seed (default: config value, else {DEFAULT_SEED})")
    p.add_argument("--strict-600s", action="store_true",
                   help="use the standard 600 s flicker observation window")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel worker processes (0 = all cores; default: config value, else 1)")

    p = sub.add_parser("report", help="regenerate plots and summary from a sweep CSV")
    p.add_argument("--csv", required=True, help="sweep CSV written by 'sweep'")
    p.add_argument("--config", help="config file supplying the limits to draw")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted config override, repeatable")
    p.add_argument("--out", default=None, help="output directory (default: the CSV's directory)")

    p = sub.add_parser("presets", help="list the shipped meter models")
    p.add_argument("--demo-config", action="store_true",
                   help="print an example campaign config instead")
    return parser


def _params(args, cfg: FlickermeterConfig) -> tuple:
    duration = args.duration if args.duration is not None else cfg.record_length
    params = TestSignalParams(u_c=args.uc, f_c=args.fc, u_i_star=args.ui, f_i=args.fi,
                              duration=duration, phi_c=args.phi_c, phi_i=args.phi_i)
    return params, SamplingSpec(args.fs, args.bits)


def _flicker_cfg(args, f_c: float) -> FlickermeterConfig:
    window = 600.0 if args.strict_600s else args.window
    return calibrate_flickermeter(FlickermeterConfig(f_nominal=f_c, observation_window=window))


def _print_readings(r, prefix: str = "") -> None:
    print(f"{prefix}pst = {r.pst:.4f}")
    print(f"{prefix}thd = {r.thd:.6f} ({100 * r.thd:.4f} %)")
    print(f"{prefix}f = {r.f_meas:.4f} Hz")
    print(f"{prefix}rms = {r.u_rms:.4f} V")


def cmd_synth(args) -> int:
    params, sampling = _params(args, FlickermeterConfig())
    w = synth_two_tone(params, sampling)
    if args.out == "-":
        sys.stdout.write(waveform_text(w))
    else:
        write_waveform(w, args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.input:
        w = read_waveform(args.input)
        cfg = _flicker_cfg(args, 50.0)
    else:
        cfg = _flicker_cfg(args, args.fc)
        params, sampling = _params(args, cfg)
        w = synth_two_tone(params, sampling)
    _print_readings(analyze(w, cfg))
    return EXIT_OK


def cmd_simulate(args) -> int:
    models = {m.model_id: m for m in load_config(args.config, args.overrides).models} \
        if args.config or args.overrides else {}
    spec = models.get(args.preset) or get_preset(args.preset)
    cfg = _flicker_cfg(args, args.fc)
    params, sampling = _params(args, cfg)
    w = synth_two_tone(params, sampling)
    instances = range(spec.n_instances) if args.instance is None else [args.instance]
    phases = range(spec.n_phases) if args.phase is None else [args.phase]
    for i in instances:
        for ph in phases:
            r = read_meter(w, spec, i, ph, cfg, args.seed)
            _print_readings(r, prefix=f"{spec.model_id}[instance={i},phase={ph}] ")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.overrides)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.strict_600s:
        cfg = strict_600s(cfg)

    def progress(done, total):
        log.info("point %d/%d", done, total)

    result = run_sweep(cfg, args.workers, progress)
    bundle = write_report(result, args.out)
    print(format_summary(bundle.summary))
    print(f"wrote {bundle.csv_path}, {len(bundle.plot_paths)} plots, {bundle.summary_path}")
    return EXIT_OK


def cmd_report(args) -> int:
    limits = load_config(args.config, args.overrides).limits
    result = read_csv(args.csv, limits)
    out = Path(args.out) if args.out else Path(args.csv).parent
    emit_plots(result, out)
    summary = write_summary(result, out / "summary.json")
    print(format_summary(summary))
    return EXIT_OK


def cmd_presets(args) -> int:
    if args.demo_config:
        sys.stdout.write(DEMO_CONFIG)
        return EXIT_OK
    for spec in list(PRESETS.values()) + [IDEAL]:
        aaf = "none" if spec.aaf is None else f"{spec.aaf.kind.value} order {spec.aaf.order} @ {spec.aaf.cutoff:g} Hz"
        ff = spec.freq_filter
        print(f"{spec.model_id}: {spec.description}")
        print(f"  fs_meter = {spec.fs_meter:g} Hz, aaf = {aaf}")
        print(f"  thd_method = {spec.thd_method.value}, freq_method = {spec.freq_method.value}"
              + (f" ({ff.kind.value} @ {ff.cutoff:g} Hz)"
                 if spec.freq_method.value == "zero_crossing_weak_filter" else ""))
        print(f"  spread: gain {spec.gain_spread:g}, rate {spec.rate_spread:g}; "
              f"{spec.n_instances} instances x {spec.n_phases} phases")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth, "analyze": cmd_analyze, "simulate": cmd_simulate,
    "sweep": cmd_sweep, "report": cmd_report, "presets": cmd_presets,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KeyError, IndexError) as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
