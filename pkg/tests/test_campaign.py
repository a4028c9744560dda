import numpy as np
import pytest
from hypothesis import given, strategies as st

from meterbench.campaign import (
    INDICATORS,
    Envelope,
    LimitSet,
    Status,
    SweepConfig,
    TolerancePolicy,
    envelope,
    evaluate_point,
    run_sweep,
    strict_600s,
    verdict,
    worst,
)
from meterbench.meters import IDEAL, PRESETS, MeterModelSpec, MeterReadings, read_meter
from meterbench.report import csv_rows
from meterbench.signals import TestSignalParams, synth_two_tone


# --- verdicts ------------------------------------------------------------------------

def test_verdict_examples():
    assert verdict(0.05, 1.3, "pst").status is Status.FALSE_LIMIT_VIOLATION
    assert verdict(0.100, 0.101, "thd").status is Status.CONSISTENT
    assert verdict(50.00, 49.2, "f").status is Status.FALSE_LIMIT_VIOLATION
    assert verdict(1.3, 0.05, "pst").status is Status.MISSED_LIMIT_VIOLATION
    assert verdict(0.2, 0.6, "pst").status is Status.INCONSISTENT
    assert verdict(230.0, 231.0, "rms").status is Status.CONSISTENT
    assert verdict(230.0, 232.0, "rms").status is Status.INCONSISTENT


LIMIT_OF = {"pst": 1.0, "thd": 0.08}


@given(ind=st.sampled_from(["pst", "thd", "f"]),
       ref=st.floats(0.0, 200.0), meter=st.floats(0.0, 200.0))
def test_verdict_cells_exhaustive(ind, ref, meter):
    limits = LimitSet()
    ref_out, meter_out = limits.beyond(ind, ref), limits.beyond(ind, meter)
    status = verdict(ref, meter, ind, limits).status
    tol = TolerancePolicy()
    close = abs(meter - ref) <= tol.reference[ind] + tol.meter[ind]
    expected = {
        (True, False): Status.FALSE_LIMIT_VIOLATION,
        (False, True): Status.MISSED_LIMIT_VIOLATION,
    }.get((meter_out, ref_out), Status.CONSISTENT if close else Status.INCONSISTENT)
    assert status is expected


def test_limit_cells_enumerated():
    cells = {}
    for ref in (0.5, 1.5):
        for meter in (0.5, 0.55, 1.5, 2.5):
            cells[(ref > 1, meter > 1, abs(ref - meter) < 0.2)] = verdict(ref, meter, "pst").status
    assert cells[(False, True, False)] is Status.FALSE_LIMIT_VIOLATION
    assert cells[(True, False, False)] is Status.MISSED_LIMIT_VIOLATION
    assert cells[(False, False, True)] is Status.CONSISTENT
    assert cells[(True, True, True)] is Status.CONSISTENT
    assert cells[(True, True, False)] is Status.INCONSISTENT


def test_non_finite_is_error():
    assert verdict(float("nan"), 1.0, "pst").status is Status.ERROR


def test_limitset_validation():
    with pytest.raises(ValueError):
        LimitSet(f_band=(50.5, 51.0))
    with pytest.raises(ValueError):
        LimitSet(pst_limit=0.0)
    assert LimitSet().line_values("rms") == ()


def test_worst_precedence():
    assert worst([Status.CONSISTENT, Status.INCONSISTENT]) is Status.INCONSISTENT
    assert worst([Status.MISSED_LIMIT_VIOLATION, Status.FALSE_LIMIT_VIOLATION]) is \
        Status.FALSE_LIMIT_VIOLATION
    assert worst([Status.CONSISTENT, Status.ERROR]) is Status.ERROR
    with pytest.raises(ValueError):
        worst([])


# --- envelopes ------------------------------------------------------------------------

def test_envelope_single():
    r = MeterReadings(0.1, 0.02, 50.0, 230.0)
    env = envelope([r])
    assert env.lo == env.hi == {"pst": 0.1, "thd": 0.02, "f": 50.0, "rms": 230.0}


def test_envelope_empty():
    with pytest.raises(ValueError):
        envelope([])


def test_envelope_sort_oracle(fm):
    w = synth_two_tone(TestSignalParams(u_i_star=0.05, f_i=1560.0, duration=65.0))
    rs = [read_meter(w, PRESETS["EM-A"], i, p, fm) for i in range(3) for p in range(3)]
    env = envelope(rs)
    for ind, key in zip(INDICATORS, ("pst", "thd", "f_meas", "u_rms")):
        vals = sorted(getattr(r, key) for r in rs)
        assert (env.lo[ind], env.hi[ind]) == (vals[0], vals[-1])
        assert env.lo[ind] <= vals[4] <= env.hi[ind]
    assert env.count == 9


# --- config -----------------------------------------------------------------------------

def test_sweep_config_defaults():
    cfg = SweepConfig()
    assert cfg.grid[0] == 10.0 and cfg.grid[-1] == 2000.0 and len(cfg.grid) == 399
    assert [m.model_id for m in cfg.models] == ["EM-A", "EM-B", "EM-C"]
    assert cfg.signal.duration == 65.0 and cfg.master_seed == 0


@pytest.mark.parametrize("kw,match", [
    (dict(grid=[]), "empty"),
    (dict(grid=[10.0, 10.0]), "increasing"),
    (dict(signal=TestSignalParams(duration=30.0)), "shorter"),
    (dict(models=[PRESETS["EM-A"], PRESETS["EM-A"]]), "duplicate"),
    (dict(grid=[6000.0]), "cannot carry"),
])
def test_sweep_config_validation(kw, match):
    with pytest.raises(ValueError, match=match):
        SweepConfig(**kw)


def test_strict_600s():
    cfg = strict_600s(SweepConfig(grid=[100.0]))
    assert cfg.observation_window == 600.0 and cfg.signal.duration >= 605.0
    assert cfg.flickermeter.observation_window == 600.0


# --- sweeps --------------------------------------------------------------------------------

def small(grid, models, u=0.1, **kw):
    return SweepConfig(signal=TestSignalParams(u_i_star=u, duration=65.0), grid=grid,
                       models=models, **kw)


def test_ideal_single_point():
    res = run_sweep(small([250.0], [IDEAL]))
    (p,) = res.points
    assert p.error is None
    assert p.reference.thd == pytest.approx(0.1, abs=1e-3)
    assert all(v.status is Status.CONSISTENT for v in p.verdicts["IDEAL"].values())
    assert len(p.readings["IDEAL"]) == 9


def test_reference_only_run():
    res = run_sweep(small([100.0, 300.0], []))
    assert res.model_ids == [] and len(res.points) == 2
    assert all(p.reference is not None and not p.envelopes for p in res.points)


def test_point_independence():
    cfg = small([400.0, 1560.0, 1575.0], [PRESETS["EM-A"]], u=0.05)
    ordered = run_sweep(cfg)
    shuffled = [evaluate_point(cfg, f) for f in (1575.0, 400.0, 1560.0)]
    by_f = {p.f_i: p for p in shuffled}
    for p in ordered.points:
        q = by_f[p.f_i]
        assert p.reference == q.reference
        assert p.readings == q.readings
        assert p.verdicts == q.verdicts


def test_parallel_matches_serial():
    cfg = small([275.0, 1560.0, 1570.0], [PRESETS["EM-A"], PRESETS["EM-B"]], u=0.05)
    serial = run_sweep(cfg, workers=1)
    parallel = run_sweep(cfg, workers=2)
    assert csv_rows(serial) == csv_rows(parallel)


def test_seed_changes_envelopes_only_through_spread():
    cfg0 = small([1560.0], [PRESETS["EM-A"]], u=0.05)
    cfg1 = small([1560.0], [PRESETS["EM-A"]], u=0.05, master_seed=7)
    a, b = run_sweep(cfg0).points[0], run_sweep(cfg1).points[0]
    assert a.reference == b.reference
    assert a.envelopes["EM-A"] != b.envelopes["EM-A"]
    assert csv_rows(run_sweep(cfg0)) == csv_rows(run_sweep(cfg0))


def test_adding_a_model_keeps_other_readings():
    a = run_sweep(small([1560.0], [PRESETS["EM-A"]], u=0.05)).points[0]
    b = run_sweep(small([1560.0], [PRESETS["EM-B"], PRESETS["EM-A"]], u=0.05)).points[0]
    assert a.readings["EM-A"] == b.readings["EM-A"]


def test_point_failure_recorded_not_raised():
    broken = MeterModelSpec("LOWRATE", 150.0, gain_spread=0.0, rate_spread=0.0)
    res = run_sweep(small([250.0, 300.0], [broken, IDEAL]))
    for p in res.points:
        assert p.error.startswith("E_METER[LOWRATE]")
        assert all(v.status is Status.ERROR for v in p.verdicts["LOWRATE"].values())
        assert p.verdicts["IDEAL"]["thd"].status is Status.CONSISTENT


def test_em_a_false_flicker_in_band():
    res = run_sweep(small(list(np.arange(1555.0, 1566.0, 5.0)), [PRESETS["EM-A"]], u=0.05))
    flagged = [p for p in res.points
               if p.verdicts["EM-A"]["pst"].status is Status.FALSE_LIMIT_VIOLATION]
    assert flagged
    for p in flagged:
        assert p.envelopes["EM-A"].hi["pst"] > 1.0 and p.reference.pst < 0.1


def test_envelope_type():
    res = run_sweep(small([250.0], [PRESETS["EM-B"]]))
    env = res.points[0].envelopes["EM-B"]
    assert isinstance(env, Envelope)
    assert all(env.lo[k] <= env.hi[k] for k in INDICATORS)
    np.testing.assert_array_equal(res.column("thd", "EM-B", "lo"), [env.lo["thd"]])
