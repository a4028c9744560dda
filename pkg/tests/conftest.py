import numpy as np
import pytest

from meterbench.reference import default_flickermeter
from meterbench.signals import SamplingSpec, TestSignalParams, synth_two_tone


@pytest.fixture(scope="session")
def fm():
    """Calibrated 60 s flickermeter."""
    return default_flickermeter(60.0)


@pytest.fixture
def tone():
    def make(u_i_star=0.0, f_i=0.0, duration=1.0, fs=10_000.0, **kw):
        params = TestSignalParams(u_i_star=u_i_star, f_i=f_i, duration=duration, **kw)
        return synth_two_tone(params, SamplingSpec(fs))
    return make


def dft_rms(x, fs, f):
    """Brute-force single-frequency rms amplitude (no FFT)."""
    t = np.arange(x.size) / fs
    return np.sqrt(2) * abs(np.sum(x * np.exp(-2j * np.pi * f * t))) / x.size


ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
