"""Identity, inequality and flow suites with convergence-order measurement.

Every suite returns a flat list of :class:`Verdict` objects in a fixed
order.  Fixtures are evaluated concurrently (``threads`` workers, capped by
the ``ICFLOW_THREADS`` environment variable) but results never depend on the
worker count.
"""
from __future__ import annotations

import contextvars
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import IcflowError, UnsupportedMode
from .fixtures import shape_label
from .flow import (
    NORMALIZED, UNNORMALIZED, FlowConfig, FlowState, check_monotonicity_identity,
    check_variation_formulas, run, step,
)
from .geometry import (
    check_divergence_identity, divergence_identity, support_gradient_residual, surface_geometry,
)
from .integrals import all_reports, functionals, weighted_minkowski_terms, sphere_q_value
from .shapes import AxisymEllipsoid, GridSpec, PerturbedSphere, Sphere, resample, sample_shape

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"


def default_shapes():
    return (
        Sphere(1.0, n=3),
        Sphere(2.0, n=3),
        AxisymEllipsoid(1.0, 1.5, n=3),
        AxisymEllipsoid(2.0, 1.0, n=3),
        PerturbedSphere(1.0, ((2, 0.1),), n=3),
        PerturbedSphere(1.0, ((3, 0.05),), n=3),
    )


@dataclass(frozen=True)
class SuiteConfig:
    """Shapes (their ``n`` is replaced by each entry of ``ns``), the ``k``
    values to test (``None`` means all of ``1..n-1``), the grid ladder, the
    finite-difference order and the time-probe ladder for variation checks.

    ``exact_tol`` is the relative residual treated as exact;
    ``grid_tol`` bounds the dt-extrapolated variation residuals;
    ``min_order`` defaults to ``min(p, 2) - 0.3``.
    """

    shapes: tuple = field(default_factory=default_shapes)
    ns: tuple = (3, 4, 5)
    ks: tuple | None = None
    ladder: tuple = (32, 64, 128)
    order: int = 4
    dt_probes: tuple = (1e-3, 5e-4, 2.5e-4)
    variation_speed: str = UNNORMALIZED
    exact_tol: float = 1e-10
    grid_tol: float = 1e-4
    min_order: float | None = None
    threads: int | None = None

    def __post_init__(self):
        if len(self.ladder) < 2 or any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ValueError(f"grid ladder must be strictly increasing with >= 2 rungs: {self.ladder}")
        if any(b >= a for a, b in zip(self.dt_probes, self.dt_probes[1:])) or len(self.dt_probes) < 3:
            raise ValueError("dt_probes must be >= 3 strictly decreasing values")

    @property
    def required_order(self):
        return self.min_order if self.min_order is not None else min(self.order, 2) - 0.3

    def k_values(self, n):
        return [k for k in (self.ks or range(1, n)) if 1 <= k <= n - 1]


@dataclass(frozen=True)
class Verdict:
    """Outcome of one check on one fixture.

    ``values`` holds ``(x, residual)`` pairs where ``x`` is a grid size or a
    time probe; failures always carry the offending numbers.
    """

    check: str
    fixture: str
    n: int
    k: int | None
    status: str
    values: tuple
    order: float | None = None
    tolerances: tuple = ()
    message: str = ""

    @property
    def passed(self):
        return self.status != FAIL


def worker_count(threads=None):
    cap = os.environ.get("ICFLOW_THREADS")
    n = threads or (os.cpu_count() or 1)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def _map(fn, items, threads):
    workers = worker_count(threads)
    if workers == 1:
        return [fn(x) for x in items]
    # each task runs in a copy of the caller's context so injected faults reach workers
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(contextvars.copy_context().run, fn, x) for x in items]
        return [f.result() for f in futures]


def convergence_order(xs, residuals, floor=0.0):
    """Least-squares decay order of ``residuals`` against grid sizes ``xs``.

    Points at or below ``floor`` are excluded; ``None`` if fewer than two remain.
    """
    pts = [(x, r) for x, r in zip(xs, residuals) if abs(r) > floor]
    if len(pts) < 2:
        return None
    x, r = np.log([p[0] for p in pts]), np.log([abs(p[1]) for p in pts])
    return float(-np.polyfit(x, r, 1)[0])


def richardson_order(dts, residuals):
    """Order in ``dt`` from successive differences of residuals at halved probes.

    Differences cancel any dt-independent (grid) error.  Returns the mean of
    the available estimates, or ``None`` if a difference vanishes.
    """
    r = np.asarray(residuals, dtype=float)
    d = np.abs(np.diff(r))
    ratios = np.asarray(dts[:-1]) / np.asarray(dts[1:])
    if np.any(d == 0):
        return None
    est = np.log(d[:-1] / d[1:]) / np.log(ratios[1:])
    return float(np.mean(est))


def _grid_verdict(check, label, n, k, Ns, res, cfg):
    tol = (("exact_tol", cfg.exact_tol), ("min_order", cfg.required_order))
    values = tuple(zip(Ns, res))
    if all(abs(r) <= cfg.exact_tol for r in res):
        return Verdict(check, label, n, k, PASS, values, float("inf"), tol, "exact")
    order = convergence_order(Ns, res, floor=cfg.exact_tol * 1e-2)
    if abs(res[-1]) <= cfg.exact_tol:
        return Verdict(check, label, n, k, PASS, values, order, tol, "converged to round-off")
    if order is not None and order >= cfg.required_order:
        return Verdict(check, label, n, k, PASS, values, order, tol)
    return Verdict(check, label, n, k, FAIL, values, order, tol,
                   f"order {order} below {cfg.required_order:.2f}; residuals {res}")


def _fixture_label(spec):
    label = shape_label(spec)
    return f"{label} n={spec.n}"


def _with_n(spec, n):
    return replace(spec, n=n)


def _trace_residual(sample):
    fr, cd = surface_geometry(sample)
    n = sample.n
    worst = 0.0
    for j, T in enumerate(cd.T):
        tr = np.trace(T, axis1=1, axis2=2)
        scale = 1.0 + np.abs(cd.sigma[:, j]) * (n - 1)
        worst = max(worst, float(np.max(np.abs(tr - (n - 1 - j) * cd.sigma[:, j]) / scale)))
        trs = np.trace(T @ fr.S, axis1=1, axis2=2)
        scale = 1.0 + np.abs(cd.sigma[:, j + 1]) * (j + 1)
        worst = max(worst, float(np.max(np.abs(trs - (j + 1) * cd.sigma[:, j + 1]) / scale)))
    return worst


def _identity_values(sample, k):
    n = sample.n
    fs = functionals(sample, k)
    out = {}
    lhs, rhs = divergence_identity(sample, k)
    fr, cd = surface_geometry(sample)
    scale = float(np.max(np.abs(2 * (n - k) * cd.sigma[:, k - 1])))
    out["divergence"] = float(np.max(np.abs(lhs - rhs))) / scale
    out["minkowski"] = abs(fs.I_uH[k] - fs.IH(k - 1)) / abs(fs.IH(k - 1))
    t = weighted_minkowski_terms(sample, k)
    out["weighted_minkowski_r2"] = abs(t["lhs_a"] - t["rhs_a"]) / abs(t["lhs_a"])
    out["weighted_minkowski_u"] = abs(t["lhs_b"] - t["rhs_b"]) / abs(t["lhs_b"])
    return out


def _variation_verdicts(spec, k, label, cfg):
    n = spec.n
    grid = GridSpec.axisym(cfg.ladder[-1], cfg.order)
    state = FlowState.initial(spec, grid)
    fcfg = FlowConfig(n=n, k=k, speed=cfg.variation_speed)
    res = np.array([check_variation_formulas(state, fcfg, d) for d in cfg.dt_probes])
    fs = functionals(state.sample, k)
    scales = (abs(fs.IH(k - 1)), abs(fs.I_r2H[k]), float(np.max(state.sample.rho)) ** 2)
    out = []
    tol = (("exact_tol", cfg.exact_tol), ("grid_tol", cfg.grid_tol), ("min_order", 2 - 0.3))
    for col, name in enumerate(("variation_IH", "variation_r2H", "variation_r2")):
        r = res[:, col] / scales[col]
        values = tuple(zip(cfg.dt_probes, r.tolist()))
        if np.all(np.abs(r) <= cfg.exact_tol):
            out.append(Verdict(name, label, n, k, PASS, values, float("inf"), tol, "exact"))
            continue
        order = richardson_order(cfg.dt_probes, r)
        ratio = cfg.dt_probes[-2] / cfg.dt_probes[-1]
        extrapolated = r[-1] - (r[-2] - r[-1]) / (ratio**2 - 1)
        dt_signal = float(np.max(np.abs(np.diff(r))))
        if dt_signal <= cfg.exact_tol:
            ok = abs(extrapolated) <= cfg.grid_tol
            msg = "no dt dependence above round-off"
        else:
            ok = order is not None and order >= 2 - 0.3 and abs(extrapolated) <= cfg.grid_tol
            msg = "" if ok else f"order {order}, extrapolated residual {extrapolated:.3e}"
        out.append(Verdict(name, label, n, k, PASS if ok else FAIL, values, order, tol, msg))
    return out


def _identity_fixture(args):
    spec, cfg = args
    n = spec.n
    label = _fixture_label(spec)
    samples = [sample_shape(spec, GridSpec.axisym(N, cfg.order)) for N in cfg.ladder]
    verdicts = []
    try:
        traces = [_trace_residual(s) for s in samples]
        status = PASS if max(traces) <= cfg.exact_tol else FAIL
        verdicts.append(Verdict("newton_trace", label, n, None, status, tuple(zip(cfg.ladder, traces)),
                                None, (("exact_tol", cfg.exact_tol),)))
        grad_u = []
        for s in samples:
            scale = float(np.max(s.rho)) * float(np.max(np.abs(frames_kappa(s))))
            grad_u.append(float(np.max(np.abs(support_gradient_residual(s)))) / scale)
        verdicts.append(_grid_verdict("support_gradient", label, n, None, cfg.ladder, grad_u, cfg))
        for k in cfg.k_values(n):
            vals = [_identity_values(s, k) for s in samples]
            for check in ("divergence", "minkowski", "weighted_minkowski_r2", "weighted_minkowski_u"):
                verdicts.append(_grid_verdict(check, label, n, k, cfg.ladder, [v[check] for v in vals], cfg))
            verdicts.extend(_variation_verdicts(spec, k, label, cfg))
    except IcflowError as exc:
        verdicts.append(Verdict("error", label, n, None, FAIL, (), None, (), f"{type(exc).__name__}: {exc}"))
    return verdicts


def frames_kappa(sample):
    fr, _ = surface_geometry(sample)
    return fr.kappa


def _fixtures(cfg):
    return [_with_n(s, n) for n in cfg.ns for s in cfg.shapes]


def run_identity_suite(cfg=None):
    """Curvature-algebra, divergence, Minkowski, weighted-Minkowski and variation checks."""
    cfg = cfg or SuiteConfig()
    results = _map(_identity_fixture, [(s, cfg) for s in _fixtures(cfg)], cfg.threads)
    return [v for vs in results for v in vs]


def _is_sphere(spec):
    return isinstance(spec, Sphere) or (
        isinstance(spec, AxisymEllipsoid) and spec.a == spec.b
    ) or (isinstance(spec, PerturbedSphere) and all(e == 0 for _, e in spec.modes))


def _inequality_fixture(args):
    spec, cfg = args
    n = spec.n
    label = _fixture_label(spec)
    sphere = _is_sphere(spec)
    per_rung = []
    for N in cfg.ladder:
        sample = sample_shape(spec, GridSpec.axisym(N, cfg.order))
        per_rung.append(all_reports(sample))
    verdicts = []
    finest = per_rung[-1]
    wanted = set(cfg.k_values(n))
    for i, rep in enumerate(finest):
        if cfg.ks is not None and rep.k not in wanted:
            continue
        values = tuple((N, reps[i].residual) for N, reps in zip(cfg.ladder, per_rung))
        tol = (("tau", rep.tau), ("margin", rep.margin), ("relative_margin", rep.relative_margin))
        check = rep.label
        if not rep.hypotheses_ok:
            verdicts.append(Verdict(check, label, n, rep.k, SKIPPED, values, None, tol,
                                    "hypotheses fail (star-shaped / k-convex)"))
            continue
        if sphere:
            ok = abs(rep.residual) <= 10 * rep.tau
            msg = "equality case" if ok else f"sphere residual {rep.residual:.3e} exceeds 10 tau"
        elif rep.name == "main_1_7":
            ok = rep.residual > 10 * rep.tau
            msg = "strict" if ok else f"residual {rep.residual:.3e} not above 10 tau = {10 * rep.tau:.3e}"
        else:
            ok = rep.residual >= -rep.tau
            msg = "" if ok else f"residual {rep.residual:.3e} below -tau"
        verdicts.append(Verdict(check, label, n, rep.k, PASS if ok else FAIL, values, None, tol, msg))
    # implication chain (1.7) => (1.6) => (1.5): each weaker residual dominates the stronger one
    rungs = [{r.label: r for r in reps} for reps in per_rung]
    for k in (k for k in range(2, n) if k in wanted):
        for strong, weak in (("main_1_7", "wz_1_6"), ("wz_1_6", "km_1_5")):
            key_s, key_w = f"{strong}(k={k})", f"{weak}(k={k})"
            s, w = rungs[-1][key_s], rungs[-1][key_w]
            tau = s.tau + w.tau
            check = f"chain_{strong}_{weak}(k={k})"
            values = tuple((N, r[key_w].residual - r[key_s].residual) for N, r in zip(cfg.ladder, rungs))
            if not (s.hypotheses_ok and w.hypotheses_ok):
                verdicts.append(Verdict(check, label, n, k, SKIPPED, values, None, (("tau", tau),)))
                continue
            ok = w.residual - s.residual >= -tau
            verdicts.append(Verdict(check, label, n, k, PASS if ok else FAIL, values, None, (("tau", tau),),
                                    "" if ok else f"{weak} residual {w.residual:.3e} below {strong} "
                                    f"residual {s.residual:.3e}"))
    return verdicts


def run_inequality_suite(cfg=None):
    """Every inequality on every fixture; spheres must give equality."""
    cfg = cfg or SuiteConfig()
    results = _map(_inequality_fixture, [(s, cfg) for s in _fixtures(cfg)], cfg.threads)
    return [v for vs in results for v in vs]


@dataclass(frozen=True)
class FlowFixture:
    """One flow experiment.

    ``kind`` is ``"normalized"`` (monotonicity, conservation, bounds,
    dissipation terms), ``"equivalence"`` (normalized against rescaled
    un-normalized) or ``"rk4_order"`` (sphere growth under the un-normalized
    flow at three step sizes).
    """

    spec: object
    k: int
    kind: str = "normalized"
    n_phi: int = 64
    t_end: float = 5.0
    record_every: float = 0.25
    limit_tol: float | None = 0.01
    dt_values: tuple = (1e-2, 5e-3, 2.5e-3)


def default_flow_fixtures():
    p = PerturbedSphere(1.0, ((2, 0.1),), n=3)
    return (
        FlowFixture(Sphere(1.0, n=3), 1, t_end=1.0),
        FlowFixture(Sphere(2.0, n=4), 2, t_end=1.0),
        FlowFixture(p, 1),
        FlowFixture(p, 2),
        FlowFixture(AxisymEllipsoid(1.0, 1.5, n=5), 3, t_end=1.0, n_phi=48, limit_tol=None),
        FlowFixture(p, 1, kind="equivalence", n_phi=48, t_end=1.0),
        FlowFixture(Sphere(1.0, n=3), 1, kind="rk4_order", n_phi=16, t_end=1.0),
    )


def _flow_normalized(fx, order):
    spec, k = fx.spec, fx.k
    n = spec.n
    label = _fixture_label(spec)
    cfg = FlowConfig(n=n, k=k, speed=NORMALIZED, t_end=fx.t_end, dt_initial=0.05)
    grid = GridSpec.axisym(fx.n_phi, order)
    probes = []
    rho_dev = []
    sphere = _is_sphere(spec)
    r0 = spec.radius if isinstance(spec, Sphere) else None

    def on_record(state, rec):
        if r0 is not None:
            rho_dev.append(float(np.max(np.abs(state.sample.rho - r0))))
        if len(probes) < 3 and rec.t in (0.0, round(fx.t_end / 2 / fx.record_every) * fx.record_every):
            fine = check_monotonicity_identity(state, cfg, 1e-3)
            half = FlowState(resample(state.sample, state.sample.grid.coarsened()), state.t)
            coarse = check_monotonicity_identity(half, cfg, 1e-3)
            probes.append((rec.t, fine, abs((coarse.lhs_rate - coarse.rhs) - (fine.lhs_rate - fine.rhs))))

    recs = run(spec, grid, cfg, fx.record_every, on_record)
    Q = np.array([r.Qk for r in recs])
    tau = np.array([r.tau for r in recs])
    t = [r.t for r in recs]
    limit = sphere_q_value(n, k)
    out = []

    def add(check, ok, values, tol=(), msg=""):
        out.append(Verdict(check, label, n, k, PASS if ok else FAIL, tuple(values), None, tuple(tol), msg))

    inc = np.diff(Q) - (tau[1:] + tau[:-1] + 1e-12 * np.abs(Q[1:]))
    add("flow_monotone", bool(np.all(inc <= 0)), zip(t, Q.tolist()), (("tau_max", float(tau.max())),),
        "" if np.all(inc <= 0) else f"Q_k increased by {float(np.max(np.diff(Q))):.3e}")
    drift = max(r.conservation_drift for r in recs)
    add("flow_conservation", drift <= 1e-4, [("drift", drift)], (("max_drift", 1e-4),))
    low = Q - (limit - tau)
    add("flow_lower_bound", bool(np.all(low >= 0)), [("min_Q_minus_limit", float(np.min(Q - limit)))],
        (("limit", limit),))
    if fx.limit_tol is not None:
        rel = abs(Q[-1] / limit - 1)
        add("flow_limit", rel <= fx.limit_tol, [("final_rel_gap", rel)], (("tol", fx.limit_tol),))
    else:
        dec = Q[0] > limit and Q[-1] < Q[0]
        add("flow_decreases_toward_limit", dec, [("Q0", Q[0]), ("Qend", Q[-1]), ("limit", limit)])
    # each term must be non-positive up to that record's tau (plus round-off)
    slack = [r.tau + 64 * np.finfo(float).eps * max(map(abs, r.dissipation)) for r in recs]
    excess = [max(r.dissipation) - sl for r, sl in zip(recs, slack)]
    add("flow_dissipation_signs", max(excess) <= 0,
        [(r.t, max(r.dissipation)) for r in recs], (("tau_max", float(tau.max())),))
    scale0 = abs(probes[0][1].rhs) if probes else 0.0
    for tp, terms, grid_err in probes:
        gap = abs(terms.lhs_rate - terms.rhs)
        tol = 2 * grid_err + 1e-6 * scale0 + 1e-12
        add(f"dissipation_identity(t={tp:g})", gap <= tol, [("lhs_rate", terms.lhs_rate), ("rhs", terms.rhs),
            ("newton_maclaurin", terms.newton_maclaurin), ("speed_square", terms.speed_square),
            ("gradient_square", terms.gradient_square)], (("tol", tol),),
            "" if gap <= tol else f"rate gap {gap:.3e} exceeds two-grid tolerance {tol:.3e}")
    if sphere and r0 is not None:
        dev = max(rho_dev)
        add("flow_sphere_fixed_point", dev <= 1e-10, [("max_rho_dev", dev)], (("tol", 1e-10),))
    return out


def _flow_equivalence(fx, order):
    spec, k = fx.spec, fx.k
    n = spec.n
    label = _fixture_label(spec)
    grid = GridSpec.axisym(fx.n_phi, order)
    norm = run(spec, grid, FlowConfig(n=n, k=k, speed=NORMALIZED, t_end=fx.t_end, dt_initial=0.05),
               fx.record_every)
    raw = run(spec, grid, FlowConfig(n=n, k=k, speed=UNNORMALIZED, t_end=fx.t_end, dt_initial=0.05),
              fx.record_every)
    qa = np.array([r.Qk for r in norm])
    qb = np.array([r.Qk for r in raw])
    tau = np.array([r.tau for r in norm]) + np.array([r.tau for r in raw])
    gap = np.abs(qa - qb)
    ok = bool(np.all(gap <= tau + 1e-6 * np.abs(qa)))
    return [Verdict("flow_equivalence", label, n, k, PASS if ok else FAIL,
                    tuple((r.t, float(g)) for r, g in zip(norm, gap)), None,
                    (("rel_tol", 1e-6), ("tau_max", float(tau.max()))))]


def _flow_rk4(fx, order):
    spec, k = fx.spec, fx.k
    n = spec.n
    label = _fixture_label(spec)
    grid = GridSpec.axisym(fx.n_phi, order)
    errs = []
    for dt in fx.dt_values:
        cfg = FlowConfig(n=n, k=k, speed=UNNORMALIZED, t_end=fx.t_end, dt_initial=dt, adaptive=False)
        state = FlowState.initial(spec, grid)
        while state.t < fx.t_end - 1e-12:
            state = step(state, cfg, min(dt, fx.t_end - state.t))
        errs.append(float(np.max(np.abs(state.sample.rho - spec.radius * np.exp(fx.t_end)))))
    order_fit = convergence_order(1 / np.asarray(fx.dt_values), errs)
    ok = order_fit is not None and order_fit >= 4 - 0.3
    return [Verdict("rk4_order", label, n, k, PASS if ok else FAIL, tuple(zip(fx.dt_values, errs)),
                    order_fit, (("min_order", 3.7),))]



def _flow_fixture(args):
    fx, order = args
    try:
        if fx.kind == "normalized":
            return _flow_normalized(fx, order)
        if fx.kind == "equivalence":
            return _flow_equivalence(fx, order)
        if fx.kind == "rk4_order":
            return _flow_rk4(fx, order)
        raise ValueError(f"unknown flow fixture kind {fx.kind!r}")
    except IcflowError as exc:
        return [Verdict("flow_error", _fixture_label(fx.spec), fx.spec.n, fx.k, FAIL, (), None, (),
                        f"{type(exc).__name__} at t={getattr(exc, 't', None)}: {exc}")]


def run_flow_suite(cfg=None, fixtures=None):
    """Monotonicity, conservation, limit, dissipation and equivalence checks along flows."""
    cfg = cfg or SuiteConfig()
    fixtures = default_flow_fixtures() if fixtures is None else fixtures
    results = _map(_flow_fixture, [(fx, cfg.order) for fx in fixtures], cfg.threads)
    return [v for vs in results for v in vs]


def all_passed(verdicts):
    return all(v.passed for v in verdicts)


__all__ = [
    "SuiteConfig", "Verdict", "FlowFixture", "run_identity_suite", "run_inequality_suite",
    "run_flow_suite", "convergence_order", "richardson_order", "all_passed", "UnsupportedMode",
    "check_divergence_identity",
]
