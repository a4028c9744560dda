"""A short sweep over the aliasing band, written out as CSV, plots and summary."""
import sys
import tempfile

import numpy as np

from meterbench import SweepConfig, run_sweep, write_report
from meterbench.report import format_summary

out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="meterbench-")
cfg = SweepConfig(grid=np.arange(1500.0, 1601.0, 10.0))
bundle = write_report(run_sweep(cfg), out)
print(format_summary(bundle.summary))
print(f"report in {out}")
