"""A weakly filtered zero-crossing counter sees extra crossings from a strong high component."""
from meterbench import PRESETS, TestSignalParams, analyze, read_meter, synth_two_tone
from meterbench.reference import default_flickermeter

fm = default_flickermeter(60.0)
for f_i in (500.0, 1230.0, 1350.0):
    w = synth_two_tone(TestSignalParams(u_i_star=0.05, f_i=f_i, duration=65.0))
    ref = analyze(w, fm).f_meas
    meter = read_meter(w, PRESETS["EM-C"], 0, 0, fm).f_meas
    print(f"f_i={f_i:6g} Hz  reference f={ref:.4f} Hz  EM-C f={meter:.4f} Hz")
