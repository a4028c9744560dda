"""Butterworth design through the prewarped bilinear transform, then a coherent DFT."""
import numpy as np

from meterbench import AnalogFilterSpec, synth_two_tone, TestSignalParams
from meterbench.dsp import design_filter, dft_integer_cycles

lp = design_filter(AnalogFilterSpec("butterworth_lowpass", 4, 700.0), 10_000.0)
for f in (100.0, 700.0, 1400.0, 2800.0):
    print(f"|H({f:g} Hz)| = {20 * np.log10(np.abs(lp.response([f]))[0]):7.2f} dB")
print(f"largest pole radius {np.abs(lp.poles()).max():.4f}")

w = synth_two_tone(TestSignalParams(u_i_star=0.1, f_i=275.0, duration=0.2))
s = dft_integer_cycles(w, 50.0)
for k in np.argsort(s.bin_values)[-2:][::-1]:
    print(f"bin {s.frequency(k):g} Hz: {s.bin_values[k]:.3f} V rms")
