import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from meterbench.signals import SamplingSpec, TestSignalParams, Waveform, make_phases, quantize, synth_two_tone


def test_pure_sine_rms():
    w = synth_two_tone(TestSignalParams(u_i_star=0.0), SamplingSpec(10_000))
    assert len(w) == 10_000
    assert w.rms() == pytest.approx(230.0, rel=1e-9)


def test_orthogonal_tone_rms():
    w = synth_two_tone(TestSignalParams(u_i_star=0.1, f_i=250.0))
    assert w.rms() == pytest.approx(230 * math.sqrt(1.01), rel=1e-9)


def test_coherent_addition_at_fundamental():
    w = synth_two_tone(TestSignalParams(u_i_star=0.05, f_i=50.0))
    assert w.rms() == pytest.approx(241.5, rel=1e-9)


def test_sample_instants_follow_start_time():
    p = TestSignalParams(duration=0.01)
    w = synth_two_tone(p, SamplingSpec(10_000), start_time=0.25)
    np.testing.assert_allclose(w.samples, p.evaluate(0.25 + np.arange(100) / 10_000))


@pytest.mark.parametrize("kw", [
    dict(u_c=0), dict(f_c=-1), dict(f_i=-5), dict(u_i_star=1.0), dict(u_i_star=-0.1),
    dict(duration=0), dict(u_c=math.nan), dict(phi_i=math.inf),
])
def test_rejects_invalid_params(kw):
    with pytest.raises(ValueError):
        TestSignalParams(**kw)


def test_rejects_aliasing_stimulus():
    with pytest.raises(ValueError, match="alias"):
        synth_two_tone(TestSignalParams(u_i_star=0.1, f_i=600.0), SamplingSpec(1200))


@pytest.mark.parametrize("bits", [7, 25])
def test_quantizer_bits_bounds(bits):
    with pytest.raises(ValueError):
        SamplingSpec(10_000, bits)


def test_quantizer_is_mid_tread_within_half_step():
    x = np.linspace(-100, 100, 1001)
    fs = 4 * math.sqrt(2) * 230
    step = 2 * fs / 2**12
    q = quantize(x, 12, fs)
    assert np.max(np.abs(q - x)) <= step / 2 + 1e-12
    assert quantize(np.array([0.0]), 12, fs)[0] == 0.0


def test_quantized_waveform_has_no_closed_form():
    w = synth_two_tone(TestSignalParams(u_i_star=0.0), SamplingSpec(10_000, 16))
    assert w.source is None
    assert w.rms() == pytest.approx(230.0, rel=1e-4)


def test_waveform_is_immutable_and_finite():
    w = synth_two_tone(TestSignalParams(duration=0.1))
    with pytest.raises(ValueError):
        w.samples[0] = 1.0
    with pytest.raises(ValueError):
        Waveform(np.array([0.0, np.nan]), 100.0)


def test_make_phases_identical():
    p = TestSignalParams(u_i_star=0.05, f_i=300.0, duration=0.2)
    phases = make_phases(p, SamplingSpec(), 3)
    assert len(phases) == 3
    for w in phases[1:]:
        np.testing.assert_array_equal(w.samples, phases[0].samples)
    single = make_phases(p, SamplingSpec(), 1)
    np.testing.assert_array_equal(single[0].samples, synth_two_tone(p).samples)


def test_deterministic():
    p = TestSignalParams(u_i_star=0.07, f_i=1234.5, phi_i=0.3)
    assert synth_two_tone(p).samples.tobytes() == synth_two_tone(p).samples.tobytes()


@settings(max_examples=30, deadline=None)
@given(u_c=st.floats(1.0, 500.0), u_i=st.floats(0.0, 0.9),
       k_i=st.integers(1, 199).filter(lambda k: k != 5),
       phi_c=st.floats(-3.0, 3.0), phi_i=st.floats(-3.0, 3.0))
def test_parseval(u_c, u_i, k_i, phi_c, phi_i):
    # f_i on the 10 Hz grid completes whole cycles in 1 s
    p = TestSignalParams(u_c=u_c, u_i_star=u_i, f_i=10.0 * k_i, phi_c=phi_c, phi_i=phi_i)
    w = synth_two_tone(p)
    assert w.rms() ** 2 == pytest.approx(u_c**2 * (1 + u_i**2), rel=1e-6)
