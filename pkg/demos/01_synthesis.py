"""Two-tone synthesis: an additive component on the 230 V / 50 Hz fundamental."""
from meterbench import SamplingSpec, TestSignalParams, synth_two_tone

params = TestSignalParams(u_i_star=0.05, f_i=1560.0, duration=1.0)
w = synth_two_tone(params)
print(f"{len(w)} samples at {w.fs:g} Hz, rms = {w.rms():.4f} V")
print(f"expected rms = {230.0 * (1 + 0.05**2) ** 0.5:.4f} V (orthogonal tones add in power)")

q = synth_two_tone(params, SamplingSpec(quantizer_bits=12))
print(f"12-bit quantized rms = {q.rms():.4f} V")
