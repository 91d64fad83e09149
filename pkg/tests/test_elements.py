import math

import numpy as np
import pytest

from snapnet.elements import (
    AIR_VISCOSITY,
    Branch,
    ChannelGeometry,
    SnapSpec,
    Source,
    SourceKind,
    build_cubic_pv,
    channel_resistance,
    equilibrium_volume,
    gas_capacitance,
    lobe_pressure,
    scaled_weak_spec,
    source_value,
)
from snapnet.errors import (
    InfeasibleSpecError,
    NoRootOnBranchError,
    OutOfRangeError,
)
from snapnet.units import M3_PER_ML, M3_PER_UL, P_ATM


def fig10_spec():
    # strong lobe of the calibrated dome: 41 mbar snap-through, ~0 mbar
    # snap-back, fold volumes giving a deflection span around 0.4 mL total
    return SnapSpec.from_folds(4100.0, 0.0, 60e-9, 160e-9)


# ---------------------------------------------------------------------------
# build_cubic_pv


def test_cubic_matches_linear_system_oracle():
    # normalized units: p_st=2 at v=1, p_sb=1 at v=2; oracle solves the
    # 4-equation linear system for (a3..a0) directly
    m = np.array(
        [
            [1.0, 1.0, 1.0, 1.0],  # p(1) = 2
            [8.0, 4.0, 2.0, 1.0],  # p(2) = 1
            [3.0, 2.0, 1.0, 0.0],  # p'(1) = 0
            [12.0, 4.0, 1.0, 0.0],  # p'(2) = 0
        ]
    )
    coeffs = np.linalg.solve(m, np.array([2.0, 1.0, 0.0, 0.0]))

    spec = SnapSpec(2.0, 1.0, 0.0, 3.0, 1.0, 2.0)
    pv = build_cubic_pv(spec)
    assert np.allclose([pv.a3, pv.a2, pv.a1, pv.a0], coeffs, rtol=1e-12)
    assert abs(pv.slope(1.0)) < 1e-12
    assert abs(pv.slope(2.0)) < 1e-12


def test_cubic_fig10_fold_pressures():
    pv = build_cubic_pv(fig10_spec())
    p_st, p_sb, v_lo, v_hi = pv.folds()
    assert p_st == pytest.approx(4100.0, rel=1e-9)
    assert abs(p_sb) < 1e-9 * 4100.0
    assert v_lo == pytest.approx(60e-9, rel=1e-9)
    assert v_hi == pytest.approx(160e-9, rel=1e-9)


def test_degenerate_spec_is_infeasible():
    spec = SnapSpec(1000.0, 1000.0, 0.0, 4e-7, 1e-7, 2e-7)
    with pytest.raises(InfeasibleSpecError):
        build_cubic_pv(spec)
    with pytest.raises(InfeasibleSpecError):
        build_cubic_pv(SnapSpec(1000.0, 2000.0, 0.0, 4e-7, 1e-7, 2e-7))


def test_fold_round_trip_random_specs():
    rng = np.random.default_rng(42)
    for _ in range(50):
        p_st = rng.uniform(100.0, 9000.0)
        p_sb = p_st - rng.uniform(10.0, 8000.0)
        u = rng.uniform(1e-9, 3e-7)
        w = u + rng.uniform(1e-9, 4e-7)
        spec = SnapSpec.from_folds(p_st, p_sb, u, w)
        got = build_cubic_pv(spec).folds()
        for val, want in zip(got, (p_st, p_sb, u, w)):
            assert val == pytest.approx(want, rel=1e-9, abs=1e-9 * p_st)


def test_from_folds_rest_volumes():
    spec = fig10_spec()
    pv = build_cubic_pv(spec)
    assert pv.pressure(spec.v_closed) == pytest.approx(0.0, abs=1e-6)
    assert spec.v_closed < spec.v_fold_lo
    # p_snap_back = 0 here, so v_open is the post-snap landing volume
    assert spec.v_open > spec.v_fold_hi
    assert pv.pressure(spec.v_open) == pytest.approx(4100.0, rel=1e-9)

    bistable = SnapSpec.from_folds(4100.0, -50.0, 60e-9, 160e-9)
    pv2 = build_cubic_pv(bistable)
    assert pv2.pressure(bistable.v_open) == pytest.approx(0.0, abs=1e-6)


# ---------------------------------------------------------------------------
# lobe_pressure


def test_lobe_pressure_at_folds_is_exact():
    spec = fig10_spec()
    pv = build_cubic_pv(spec)
    assert lobe_pressure(pv, spec.v_fold_lo) == pytest.approx(4100.0, rel=1e-12)
    assert abs(lobe_pressure(pv, spec.v_fold_hi)) < 1e-9


def test_lobe_pressure_horner_vs_naive_powers():
    pv = build_cubic_pv(fig10_spec())
    s = pv.spec
    for v in np.linspace(s.v_closed, s.v_open, 10):
        naive = pv.a3 * v**3 + pv.a2 * v**2 + pv.a1 * v + pv.a0
        assert lobe_pressure(pv, float(v)) == pytest.approx(naive, rel=1e-12, abs=1e-9)


def test_lobe_pressure_out_of_range():
    pv = build_cubic_pv(fig10_spec())
    s = pv.spec
    span = s.v_open - s.v_closed
    with pytest.raises(OutOfRangeError):
        lobe_pressure(pv, s.v_closed - 0.6 * span)
    with pytest.raises(OutOfRangeError):
        lobe_pressure(pv, s.v_open + 0.6 * span)


def test_branch_monotonicity_on_grid():
    pv = build_cubic_pv(fig10_spec())
    s = pv.spec
    pre = [pv.pressure(v) for v in np.linspace(s.v_closed, s.v_fold_lo, 1000)]
    post = [pv.pressure(v) for v in np.linspace(s.v_fold_hi, s.v_open, 1000)]
    assert all(b > a for a, b in zip(pre, pre[1:]))
    assert all(b > a for a, b in zip(post, post[1:]))


# ---------------------------------------------------------------------------
# equilibrium_volume


def test_equilibrium_beyond_fold_signals_branch_switch():
    pv = build_cubic_pv(fig10_spec())
    with pytest.raises(NoRootOnBranchError):
        equilibrium_volume(pv, 4100.0 + 1e-6, Branch.PRE_SNAP)
    with pytest.raises(NoRootOnBranchError):
        equilibrium_volume(pv, -1e-6, Branch.POST_SNAP)


def test_equilibrium_at_rest_is_v_closed():
    spec = fig10_spec()
    pv = build_cubic_pv(spec)
    assert equilibrium_volume(pv, 0.0, Branch.PRE_SNAP) == pytest.approx(
        spec.v_closed, rel=1e-12
    )


def test_equilibrium_matches_bisection_oracle():
    pv = build_cubic_pv(fig10_spec())
    s = pv.spec
    p = 2000.0
    lo, hi = s.v_closed, s.v_fold_lo
    for _ in range(200):  # bisection to ~1e-12 relative
        mid = 0.5 * (lo + hi)
        if pv.pressure(mid) < p:
            lo = mid
        else:
            hi = mid
    v = equilibrium_volume(pv, p, Branch.PRE_SNAP)
    assert v == pytest.approx(0.5 * (lo + hi), rel=1e-12)
    assert abs(pv.pressure(v) - p) <= 1e-6 * max(1.0, abs(p))


def test_equilibrium_inverts_lobe_pressure_on_outer_branches():
    pv = build_cubic_pv(fig10_spec())
    s = pv.spec
    for v in np.linspace(s.v_closed, s.v_fold_lo, 25)[:-1]:
        p = pv.pressure(float(v))
        assert equilibrium_volume(pv, p, Branch.PRE_SNAP) == pytest.approx(
            float(v), rel=1e-6
        )
    for v in np.linspace(s.v_fold_hi, s.v_open, 25)[1:]:
        p = pv.pressure(float(v))
        assert equilibrium_volume(pv, p, Branch.POST_SNAP) == pytest.approx(
            float(v), rel=1e-6
        )


# ---------------------------------------------------------------------------
# channel_resistance / gas_capacitance


def test_channel_resistance_hand_value():
    geom = ChannelGeometry(diameter=0.4e-3, length=9e-3, fluid_viscosity=1.81e-5)
    want = 128.0 * 1.81e-5 * 9e-3 / (math.pi * (0.4e-3) ** 4)
    r = channel_resistance(geom)
    assert r == pytest.approx(want, rel=1e-12)
    assert r == pytest.approx(2.59e8, rel=2e-3)


def test_channel_resistance_scaling_laws():
    geom = ChannelGeometry(diameter=0.4e-3, length=9e-3)
    r = channel_resistance(geom)
    assert channel_resistance(ChannelGeometry(0.4e-3, 18e-3)) == pytest.approx(
        2.0 * r, rel=1e-12
    )
    assert channel_resistance(ChannelGeometry(0.2e-3, 9e-3)) == pytest.approx(
        16.0 * r, rel=1e-12
    )


def test_gas_capacitance_hand_value_and_limit():
    c = gas_capacitance(0.4 * M3_PER_ML, P_ATM)
    assert c == pytest.approx(0.4e-6 / 101325.0, rel=1e-12)
    assert c == pytest.approx(3.95e-12, rel=1e-3)
    assert gas_capacitance(1e-15, P_ATM) < 1e-19
    with pytest.raises(OutOfRangeError):
        gas_capacitance(0.0, P_ATM)


def test_rc_time_constant_of_derived_values():
    r = channel_resistance(ChannelGeometry(0.4e-3, 9e-3, AIR_VISCOSITY))
    c = gas_capacitance(0.4 * M3_PER_ML, P_ATM)
    assert r * c == pytest.approx(1.0e-3, rel=3e-2)


# ---------------------------------------------------------------------------
# sources


def paper_pump():
    return Source(
        SourceKind.FLOW_RAMP,
        amplitude=0.4 * M3_PER_ML,
        target_volume=0.4 * M3_PER_ML,
        switching_delay=0.1,
    )


def test_flow_ramp_segments():
    src = paper_pump()
    assert source_value(src, 0.5) == pytest.approx(0.4e-6, rel=1e-12)
    assert source_value(src, 1.05) == 0.0
    assert source_value(src, 1.5) == pytest.approx(-0.4e-6, rel=1e-12)
    assert source_value(src, 2.15) == 0.0
    assert src.cycle_time() == pytest.approx(2.1, rel=1e-12)


def test_flow_ramp_integrates_to_zero_over_cycle():
    src = paper_pump()
    # piecewise-constant law: integrate exactly segment by segment using
    # midpoint samples between the breakpoints
    marks = [0.0] + src.breakpoints(src.cycle_time()) + [src.cycle_time()]
    total = 0.0
    for a, b in zip(marks, marks[1:]):
        total += source_value(src, 0.5 * (a + b)) * (b - a)
    assert abs(total) < 1e-12 * src.target_volume / src.target_volume  # 1e-12 abs
    assert abs(total) < 1e-12


def test_pressure_wave_periodicity():
    src = Source(SourceKind.PRESSURE_RAMP_WAVE, amplitude=60000.0, frequency=1.0)
    assert source_value(src, 0.0) == source_value(src, 1.0)
    assert source_value(src, 0.25) == pytest.approx(
        source_value(src, 3.25), rel=1e-12
    )
    # held step when frequency is zero
    step = Source(SourceKind.PRESSURE_RAMP_WAVE, amplitude=500.0, frequency=0.0)
    assert source_value(step, 0.0) == 500.0
    assert source_value(step, 10.0) == 500.0


def test_vent_is_zero_gauge():
    src = Source(SourceKind.VENT)
    assert source_value(src, 0.0) == 0.0
    assert source_value(src, 5.0) == 0.0


def test_source_validation():
    with pytest.raises(InfeasibleSpecError):
        Source(SourceKind.FLOW_RAMP, amplitude=-1e-6, target_volume=1e-6).check()
    with pytest.raises(InfeasibleSpecError):
        Source(SourceKind.PRESSURE_RAMP_WAVE, amplitude=1.0, frequency=-1.0).check()
    with pytest.raises(InfeasibleSpecError):
        # 2.1 s cycle cannot repeat at 1 Hz
        Source(
            SourceKind.FLOW_RAMP,
            amplitude=0.4e-6,
            target_volume=0.4e-6,
            switching_delay=0.1,
            frequency=1.0,
        ).check()


# ---------------------------------------------------------------------------
# SnapElement


def test_scaled_weak_spec_orders_thresholds():
    strong = fig10_spec()
    weak = scaled_weak_spec(strong, threshold_ratio=0.8)
    assert weak.p_snap_through == pytest.approx(0.8 * 4100.0)
    assert weak.p_snap_through < strong.p_snap_through
    assert weak.p_snap_back > strong.p_snap_back


def test_snap_element_invariants():
    from snapnet.elements import SnapElement

    strong = build_cubic_pv(fig10_spec())
    weak = build_cubic_pv(scaled_weak_spec(fig10_spec()))
    SnapElement(weak=weak, strong=strong).check()
    with pytest.raises(InfeasibleSpecError):
        SnapElement(weak=strong, strong=weak).check()
    with pytest.raises(InfeasibleSpecError):
        SnapElement(weak=weak, strong=strong, tau_snap=0.0).check()
