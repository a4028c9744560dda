"""An unfiltered 1600 Hz meter folds 1560 Hz onto 40 Hz and reports flicker that is not there."""
from meterbench import PRESETS, TestSignalParams, analyze, read_meter, synth_two_tone
from meterbench.reference import default_flickermeter

fm = default_flickermeter(60.0)
w = synth_two_tone(TestSignalParams(u_i_star=0.01, f_i=1560.0, duration=65.0))
print(f"reference Pst = {analyze(w, fm).pst:.4f}")
for name in ("EM-A", "EM-B"):
    print(f"{name} Pst = {read_meter(w, PRESETS[name], 0, 0, fm).pst:.4f}")
