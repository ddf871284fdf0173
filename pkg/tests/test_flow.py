import numpy as np
import pytest

from icflow.errors import ConvexityLost, DimensionMismatch, FlowError, InvalidK, StepUnderflow
from icflow.flow import (
    NORMALIZED, UNNORMALIZED, FlowConfig, FlowState, check_monotonicity_identity,
    check_variation_formulas, diagnose, normal_speed, run, run_from, step,
)
from icflow.geometry import surface_geometry
from icflow.integrals import sphere_q_value
from icflow.shapes import AxisymEllipsoid, GridSpec, PerturbedSphere, Sphere, sample_shape
from icflow.verification import richardson_order


def test_config_validation():
    with pytest.raises(InvalidK):
        FlowConfig(n=3, k=3)
    with pytest.raises(ValueError):
        FlowConfig(n=3, k=1, dt_initial=0.0)
    with pytest.raises(ValueError):
        FlowConfig(n=3, k=1, t_end=-1.0)
    with pytest.raises(ValueError):
        FlowConfig(n=3, k=1, cfl_safety=1.5)
    with pytest.raises(ValueError):
        FlowConfig(n=3, k=1, speed="fast")


def test_sphere_speeds():
    s = sample_shape(Sphere(1.7, n=4), GridSpec.axisym(32))
    fr, cd = surface_geometry(s)
    for k in (1, 2, 3):
        assert np.max(np.abs(normal_speed(fr, cd, FlowConfig(n=4, k=k)))) < 1e-14
        np.testing.assert_allclose(normal_speed(fr, cd, FlowConfig(n=4, k=k, speed=UNNORMALIZED)), 1.7)


def test_speed_sign_pattern():
    spec = PerturbedSphere(1.0, ((2, 0.05),), n=3)
    s = sample_shape(spec, GridSpec.axisym(64))
    fr, cd = surface_geometry(s)
    F = normal_speed(fr, cd, FlowConfig(n=3, k=1))
    assert np.all(np.sign(F) == np.sign(cd.H[:, 0] / cd.H[:, 1] - fr.u))
    assert F.min() < 0 < F.max()


def test_custom_speed():
    cfg = FlowConfig(n=3, k=1, speed=lambda fr, cd, c: 0.5 * fr.u)
    st = FlowState.initial(Sphere(1.0, n=3), GridSpec.axisym(16))
    st = step(st, cfg, 0.01)
    np.testing.assert_allclose(st.sample.rho, np.exp(0.005), rtol=1e-10)


def test_convexity_guard():
    s = sample_shape(Sphere(1.0, n=3), GridSpec.axisym(16))
    fr, cd = surface_geometry(s)
    with pytest.raises(ConvexityLost):
        normal_speed(fr, cd, FlowConfig(n=3, k=1, convexity_floor=10.0))


def test_step_underflow():
    st = FlowState.initial(Sphere(1.0, n=3), GridSpec.axisym(16))
    with pytest.raises(StepUnderflow):
        step(st, FlowConfig(n=3, k=1), 1e-13)


def test_dimension_mismatch():
    st = FlowState.initial(Sphere(1.0, n=3), GridSpec.axisym(16))
    with pytest.raises(DimensionMismatch):
        step(st, FlowConfig(n=4, k=1))


def test_normalized_sphere_is_fixed_point():
    st = FlowState.initial(Sphere(1.0, n=3), GridSpec.axisym(32))
    cfg = FlowConfig(n=3, k=1, dt_initial=0.01)
    for _ in range(50):
        st = step(st, cfg)
    assert np.max(np.abs(st.sample.rho - 1.0)) <= 1e-10


def test_unnormalized_sphere_grows_exponentially():
    cfg = FlowConfig(n=3, k=1, speed=UNNORMALIZED, dt_initial=1e-3, adaptive=False)
    st = FlowState.initial(Sphere(1.0, n=3), GridSpec.axisym(16))
    for _ in range(1000):
        st = step(st, cfg)
    assert st.t == pytest.approx(1.0)
    np.testing.assert_allclose(st.sample.rho, np.e, atol=1e-6)


def test_sphere_run_keeps_qk_constant():
    cfg = FlowConfig(n=4, k=2, t_end=0.5)
    recs = run(Sphere(2.0, n=4), GridSpec.axisym(32), cfg, 0.1)
    assert [r.t for r in recs] == pytest.approx([0, 0.1, 0.2, 0.3, 0.4, 0.5])
    ref = 5 / 3 * 2 * np.pi**2
    for r in recs:
        assert r.Qk == pytest.approx(ref, rel=1e-12)
        assert r.conservation_drift <= 1e-13


def test_short_perturbed_run_diagnostics():
    cfg = FlowConfig(n=3, k=1, t_end=0.5)
    seen = []
    recs = run(PerturbedSphere(1.0, ((2, 0.1),), n=3), GridSpec.axisym(32), cfg, 0.1,
               on_record=lambda s, r: seen.append(s.t))
    assert seen == [r.t for r in recs]
    Q = np.array([r.Qk for r in recs])
    tau = np.array([r.tau for r in recs])
    assert np.all(np.diff(Q) <= tau[1:] + tau[:-1])
    assert max(r.conservation_drift for r in recs) < 1e-4
    assert np.all(Q >= sphere_q_value(3, 1) - tau)
    assert all(np.isfinite(r.dQk_dt_estimate) and r.dQk_dt_estimate <= 1e-6 for r in recs)
    assert all(max(r.dissipation) <= r.tau for r in recs)


def test_flow_error_carries_partial_records():
    # expanding unit sphere: H_1 = exp(-t) crosses the floor 0.5 at t = ln 2
    cfg = FlowConfig(n=3, k=1, speed=UNNORMALIZED, t_end=1.0, convexity_floor=0.5)
    with pytest.raises(ConvexityLost) as info:
        run(Sphere(1.0, n=3), GridSpec.axisym(16), cfg, 0.1)
    err = info.value
    assert np.log(2) - 0.1 < err.t < np.log(2) + 1e-9
    assert [r.t for r in err.records] == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6])


def test_regrid_rescales_without_changing_qk():
    spec = PerturbedSphere(1.0, ((2, 0.1),), n=3)
    g = GridSpec.axisym(32)
    plain = run(spec, g, FlowConfig(n=3, k=1, speed=UNNORMALIZED, t_end=0.3), 0.1)
    regrid = run(spec, g, FlowConfig(n=3, k=1, speed=UNNORMALIZED, t_end=0.3, regrid_every=5), 0.1)
    for a, b in zip(plain, regrid):
        assert b.Qk == pytest.approx(a.Qk, rel=1e-9)
    assert np.isnan(regrid[-1].conservation_drift)


def test_variation_residuals_sphere_normalized_vanish():
    st = FlowState.initial(Sphere(1.3, n=4), GridSpec.axisym(32))
    res = check_variation_formulas(st, FlowConfig(n=4, k=2), 1e-3)
    # only round-off of differenced O(100) integrals remains
    assert max(abs(x) for x in res) < 1e-12 * 2 * np.pi**2 * 1.3**3 / 1e-3


def test_variation_residuals_second_order_in_dt():
    st = FlowState.initial(PerturbedSphere(1.0, ((3, 0.03),), n=3), GridSpec.axisym(128))
    cfg = FlowConfig(n=3, k=1, speed=UNNORMALIZED)
    dts = (1e-3, 5e-4, 2.5e-4)
    res = np.array([check_variation_formulas(st, cfg, d) for d in dts])
    for col in range(3):
        assert richardson_order(dts, res[:, col]) >= 1.7


def test_monotonicity_identity():
    st = FlowState.initial(PerturbedSphere(1.0, ((2, 0.05),), n=3), GridSpec.axisym(96))
    terms = check_monotonicity_identity(st, FlowConfig(n=3, k=1))
    assert terms.lhs_rate == pytest.approx(terms.rhs, rel=1e-4)
    assert terms.newton_maclaurin <= 0 and terms.speed_square <= 0 and terms.gradient_square <= 0
    t2 = check_monotonicity_identity(st, FlowConfig(n=3, k=2))
    assert t2.newton_maclaurin == 0.0
    sph = check_monotonicity_identity(FlowState.initial(Sphere(1.0, n=3), GridSpec.axisym(32)), FlowConfig(n=3, k=1))
    assert abs(sph.lhs_rate) < 1e-10 and abs(sph.rhs) < 1e-10
    with pytest.raises(ValueError):
        check_monotonicity_identity(st, FlowConfig(n=3, k=1, speed=UNNORMALIZED))


def test_diagnose_fields():
    st = FlowState.initial(PerturbedSphere(1.0, ((2, 0.1),), n=4), GridSpec.axisym(32))
    rec = diagnose(st, FlowConfig(n=4, k=2))
    assert rec.min_u > 0 and rec.min_Hk > 0 and rec.max_F > 0 and rec.tau > 0
    assert len(rec.dissipation) == 3
