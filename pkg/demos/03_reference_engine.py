"""Reference readings: Pst, subgrouped THD, zero-crossing frequency and rms."""
from meterbench import TestSignalParams, analyze, synth_two_tone
from meterbench.reference import default_flickermeter

fm = default_flickermeter(60.0)
for f_i, u in ((41.2, 0.00178), (250.0, 0.1), (275.0, 0.1)):
    r = analyze(synth_two_tone(TestSignalParams(u_i_star=u, f_i=f_i, duration=65.0)), fm)
    print(f"f_i={f_i:6g} Hz u_i*={u:<7g} Pst={r.pst:.3f} THD={100 * r.thd:.3f} % "
          f"f={r.f_meas:.4f} Hz rms={r.u_rms:.3f} V")
