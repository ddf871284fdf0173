import numpy as np
import pytest

from icflow._faults import FAULTS, active, inject_fault
from icflow.shapes import AxisymEllipsoid, PerturbedSphere, Sphere
from icflow.verification import (
    FAIL, PASS, SKIPPED, FlowFixture, SuiteConfig, all_passed, convergence_order, richardson_order,
    run_flow_suite, run_identity_suite, run_inequality_suite, worker_count,
)

SMALL = SuiteConfig(shapes=(Sphere(1.0, n=3), AxisymEllipsoid(1.0, 1.5, n=3),
                            PerturbedSphere(1.0, ((2, 0.05),), n=3)), ns=(3, 4), threads=1)


def test_convergence_order_fit():
    Ns = (32, 64, 128)
    assert convergence_order(Ns, [1.0 / N**4 for N in Ns]) == pytest.approx(4)
    assert convergence_order(Ns, [1e-20, 1e-20, 1e-20], floor=1e-15) is None


def test_richardson_order_ignores_constant_floor():
    dts = (1e-3, 5e-4, 2.5e-4)
    assert richardson_order(dts, [3e-6 + 5 * d**2 for d in dts]) == pytest.approx(2, abs=1e-6)


def test_config_validation():
    with pytest.raises(ValueError):
        SuiteConfig(ladder=(64,))
    with pytest.raises(ValueError):
        SuiteConfig(ladder=(64, 32, 128))
    with pytest.raises(ValueError):
        SuiteConfig(dt_probes=(1e-3, 2e-3, 1e-4))
    assert SuiteConfig(order=2).required_order == pytest.approx(1.7)


def test_sphere_suite_is_exact():
    cfg = SuiteConfig(shapes=(Sphere(1.0, n=3), Sphere(2.0, n=3)), ns=(3, 4), threads=1)
    for v in run_identity_suite(cfg):
        assert v.status == PASS
        if not v.check.startswith("variation"):
            assert max(abs(r) for _, r in v.values) <= 1e-10
    ineq = run_inequality_suite(cfg)
    assert all(v.status == PASS for v in ineq)
    assert all(v.message == "equality case" for v in ineq if v.check.startswith("main_1_7"))


def test_small_suites_pass():
    ident = run_identity_suite(SMALL)
    ineq = run_inequality_suite(SMALL)
    assert all_passed(ident) and all_passed(ineq)
    strict = [v for v in ineq if v.check.startswith("main_1_7") and "sphere" not in v.fixture]
    assert strict and all(v.message == "strict" for v in strict)


def test_skipped_when_hypotheses_fail():
    from icflow.shapes import TabulatedProfile
    from icflow.verification import _inequality_fixture

    phi = np.linspace(0, np.pi, 400)
    spec = TabulatedProfile(tuple(phi), tuple(1 + 0.3 * np.cos(2 * phi)), n=3)
    vs = _inequality_fixture((spec, SuiteConfig(ladder=(32, 64, 128))))
    assert any(v.status == SKIPPED and v.check == "main_1_7(k=2)" for v in vs)
    assert not any(v.status == FAIL for v in vs)


def test_fail_verdicts_carry_numbers():
    with inject_fault("flip_h_sign"):
        vs = run_identity_suite(SMALL)
    bad = [v for v in vs if v.status == FAIL]
    assert bad
    assert all(v.values or v.message for v in bad)
    mink = [v for v in bad if v.check == "minkowski"]
    assert mink and all(v.order is None or v.order < 0.5 for v in mink)


@pytest.mark.parametrize("fault,checks", [
    ("flip_h_sign", {"minkowski", "divergence", "weighted_minkowski_r2", "weighted_minkowski_u", "support_gradient"}),
    ("binomial_off_by_one", {"minkowski", "weighted_minkowski_r2", "weighted_minkowski_u", "variation_IH"}),
    ("drop_qk_term", {"main_1_7"}),
])
def test_fault_sensitivity(fault, checks):
    with inject_fault(fault):
        assert active(fault)
        vs = run_identity_suite(SMALL) + run_inequality_suite(SMALL)
    assert not active(fault)
    failed = {v.check.split("(")[0] for v in vs if v.status == FAIL}
    assert checks <= failed
    assert fault in FAULTS


def test_fault_reaches_worker_threads():
    from dataclasses import replace

    with inject_fault("flip_h_sign"):
        vs = run_identity_suite(replace(SMALL, threads=4))
    assert any(v.status == FAIL for v in vs)


def test_unknown_fault():
    with pytest.raises(ValueError):
        with inject_fault("nope"):
            pass


def test_worker_count_env_cap(monkeypatch):
    monkeypatch.setenv("ICFLOW_THREADS", "2")
    assert worker_count(8) == 2
    monkeypatch.delenv("ICFLOW_THREADS")
    assert worker_count(3) == 3


def test_thread_count_does_not_change_verdicts():
    from dataclasses import replace

    a = run_identity_suite(replace(SMALL, threads=1)) + run_inequality_suite(replace(SMALL, threads=1))
    b = run_identity_suite(replace(SMALL, threads=4)) + run_inequality_suite(replace(SMALL, threads=4))
    assert a == b


def test_flow_suite_small():
    fx = (FlowFixture(Sphere(1.0, n=3), 1, n_phi=32, t_end=0.5),
          FlowFixture(PerturbedSphere(1.0, ((2, 0.1),), n=3), 1, n_phi=32, t_end=0.5, limit_tol=None),
          FlowFixture(Sphere(1.0, n=3), 1, kind="rk4_order", n_phi=16, t_end=0.5))
    vs = run_flow_suite(SuiteConfig(threads=2), fx)
    assert all(v.status == PASS for v in vs), [v for v in vs if v.status != PASS]
    checks = {v.check.split("(")[0] for v in vs}
    assert {"flow_monotone", "flow_conservation", "flow_lower_bound", "flow_dissipation_signs",
            "dissipation_identity", "flow_sphere_fixed_point", "rk4_order"} <= checks
