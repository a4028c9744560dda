import argparse
import hashlib
import subprocess
import sys

import pytest

from meterbench.cli import build_parser, main
from meterbench.config import DEMO_CONFIG
from meterbench.report import PLOT_NAMES


def subparsers():
    parser = build_parser()
    action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    return parser, action.choices


def test_every_subcommand_present():
    _, subs = subparsers()
    assert set(subs) == {"synth", "analyze", "simulate", "sweep", "report", "presets"}


def test_help_documents_every_flag(capsys):
    parser, subs = subparsers()
    for name, sub in subs.items():
        assert main([name, "--help"]) == 0
        text = capsys.readouterr().out
        for action in sub._actions:
            for opt in action.option_strings:
                assert opt in text, f"{name}: {opt} missing from help"
            if action.option_strings and action.dest != "help":
                assert action.help, f"{name}: {action.option_strings} lacks help text"
    for action in parser._actions:
        assert action.help


def test_help_exit_code():
    assert main(["sweep", "--help"]) == 0


def test_sweep_flags_exist():
    _, subs = subparsers()
    opts = {o for a in subs["sweep"]._actions for o in a.option_strings}
    assert {"--config", "--set", "--out", "--seed", "--strict-600s", "--workers"} <= opts


def test_analyze_prints_thd(capsys):
    code = main(["analyze", "--uc", "230", "--fc", "50", "--ui", "0.1", "--fi", "250"])
    out = capsys.readouterr().out
    assert code == 0
    thd = float(next(l for l in out.splitlines() if l.startswith("thd")).split()[2])
    assert thd == pytest.approx(0.100, abs=0.001)


def test_unknown_config_key_exit_1(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("schema_version = 1\n[sweep]\nstep = 5.0\nwidth = 2\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "sweep.width" in err and "line 4" in err


def test_usage_error_exit_1(capsys):
    assert main(["sweep", "--workers", "many"]) == 1
    assert main(["nonsense"]) == 1
    assert capsys.readouterr().out == ""


def test_runtime_failure_exit_2(tmp_path, capsys):
    missing = tmp_path / "none.txt"
    assert main(["analyze", "--input", str(missing)]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("not a waveform\n")
    assert main(["analyze", "--input", str(bad)]) == 2
    assert "not a waveform" in capsys.readouterr().err


def test_unknown_preset_exit_1(capsys):
    assert main(["simulate", "--preset", "EM-Q"]) == 1
    assert "EM-Q" in capsys.readouterr().err


def run_short_sweep(tmp_path, name):
    cfg = tmp_path / "demo.toml"
    cfg.write_text(DEMO_CONFIG)
    out = tmp_path / name
    code = main(["sweep", "--config", str(cfg), "--out", str(out),
                 "--set", "sweep.start=1555.0", "--set", "sweep.stop=1560.0"])
    return code, out


def test_sweep_happy_path_and_determinism(tmp_path, capsys):
    code, out = run_short_sweep(tmp_path, "a")
    assert code == 0
    files = ["sweep.csv", "summary.json"] + [n + ".svg" for n in PLOT_NAMES.values()]
    assert all((out / f).is_file() for f in files)
    assert "EM-A" in capsys.readouterr().out
    code, out_b = run_short_sweep(tmp_path, "b")
    for f in files:
        assert hashlib.sha256((out / f).read_bytes()).digest() == \
            hashlib.sha256((out_b / f).read_bytes()).digest(), f
    lines = (out / "sweep.csv").read_text().splitlines()
    assert len(lines) == 3

    # regenerate plots and summary from the CSV alone
    regen = tmp_path / "regen"
    assert main(["report", "--csv", str(out / "sweep.csv"), "--out", str(regen)]) == 0
    for n in PLOT_NAMES.values():
        assert (regen / f"{n}.svg").read_bytes() == (out / f"{n}.svg").read_bytes()
    assert (regen / "summary.json").is_file()


def test_synth_and_analyze_file(tmp_path, capsys):
    path = tmp_path / "w.txt"
    assert main(["synth", "--ui", "0.1", "--fi", "250", "--duration", "65", "--out", str(path)]) == 0
    head = path.read_text().splitlines()[:3]
    assert head[1] == "# fs = 10000.0" and head[2] == "# length = 650000"
    assert main(["analyze", "--input", str(path)]) == 0
    out = capsys.readouterr().out
    assert "thd = 0.1000" in out


def test_synth_to_stdout(capsys):
    assert main(["synth", "--duration", "0.001"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "# meterbench-waveform v1" and len(lines) == 4 + 10


def test_simulate_prints_readings(capsys):
    assert main(["simulate", "--preset", "EM-A", "--fi", "1560", "--ui", "0.01",
                 "--instance", "0", "--phase", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4 and lines[0].startswith("EM-A[instance=0,phase=1] pst = ")
    assert float(lines[0].split()[-1]) > 0.5


def test_simulate_config_model(tmp_path, capsys):
    cfg = tmp_path / "m.toml"
    cfg.write_text('schema_version = 1\n[[meters]]\nmodel_id = "M1"\nfs_meter = 2000.0\n'
                   "n_instances = 1\nn_phases = 2\n")
    assert main(["simulate", "--config", str(cfg), "--preset", "M1"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 8


def test_presets_listing(capsys):
    assert main(["presets"]) == 0
    out = capsys.readouterr().out
    for name in ("EM-A", "EM-B", "EM-C", "IDEAL"):
        assert f"{name}:" in out
    assert main(["presets", "--demo-config"]) == 0
    assert capsys.readouterr().out == DEMO_CONFIG


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "meterbench", "presets"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "EM-B" in proc.stdout
