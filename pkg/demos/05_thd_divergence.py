"""THD at an interharmonic: subgrouping ignores it, a residual-ratio meter counts it all."""
from meterbench import PRESETS, TestSignalParams, analyze, read_meter, synth_two_tone
from meterbench.reference import default_flickermeter

fm = default_flickermeter(60.0)
for f_i in (250.0, 252.5, 275.0):
    w = synth_two_tone(TestSignalParams(u_i_star=0.1, f_i=f_i, duration=65.0))
    ref = analyze(w, fm).thd
    row = "  ".join(f"{m}={100 * read_meter(w, PRESETS[m], 0, 0, fm).thd:6.3f} %" for m in PRESETS)
    print(f"f_i={f_i:6g} Hz  reference={100 * ref:6.3f} %  {row}")
