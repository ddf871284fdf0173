"""Inverse curvature flows of star-shaped radial graphs.

A normal motion ``dX/dt = F nu`` of the graph ``X = rho theta`` is, up to
tangential reparametrisation, the scalar equation ``d rho/dt = F v / rho``
(because ``<theta, nu> = rho / v``).  It is integrated with explicit RK4 on
an axisymmetric grid, with finite-difference derivatives of ``rho``.
"""
from __future__ import annotations

import logging
from math import comb
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import ConvexityLost, DimensionMismatch, FlowError, StarShapeLost, StepUnderflow, UnsupportedMode
from .geometry import _check_k, grad_r2_covector, sigma_without, surface_geometry
from .integrals import functionals, integrate, sphere_q_value
from .shapes import cosine_coefficients, cosine_eval, resample, sample_radius, sample_shape

log = logging.getLogger(__name__)

NORMALIZED = "normalized"
UNNORMALIZED = "unnormalized"

# largest |z| on the negative real axis inside the RK4 stability region
_RK4_REAL_STABILITY = 2.785


@dataclass(frozen=True)
class FlowConfig:
    """Parameters of a flow run.

    ``speed`` is ``"normalized"`` (``F = H_{k-1}/H_k - u``),
    ``"unnormalized"`` (``F = H_{k-1}/H_k``) or a callable
    ``speed(frame, curvature, config) -> F``.  With ``adaptive=False`` every
    step uses exactly ``dt_initial``.  ``regrid_every`` rescales ``rho`` by
    its mean every that many steps (useful for the expanding flow; ``Q_k``
    is scale invariant).
    """

    n: int
    k: int
    speed: object = NORMALIZED
    dt_initial: float = 1e-2
    t_end: float = 1.0
    cfl_safety: float = 0.3
    max_steps: int = 1_000_000
    regrid_every: int | None = None
    convexity_floor: float = 1e-8
    starshape_floor: float = 1e-8
    max_relative_change: float = 0.05
    adaptive: bool = True

    def __post_init__(self):
        _check_k(self.n, self.k)
        if not self.dt_initial > 0:
            raise ValueError(f"dt_initial must be positive, got {self.dt_initial}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if not (callable(self.speed) or self.speed in (NORMALIZED, UNNORMALIZED)):
            raise ValueError(f"unknown speed {self.speed!r}")
        if self.regrid_every is not None and self.regrid_every < 1:
            raise ValueError("regrid_every must be a positive step count")


@dataclass(frozen=True, eq=False)
class FlowState:
    sample: object
    t: float = 0.0
    step_count: int = 0
    last_dt: float | None = None

    @classmethod
    def initial(cls, spec, grid):
        if grid.mode != "axisym":
            raise UnsupportedMode("flows run on axisym grids only")
        s = sample_shape(spec, grid)
        return cls(sample_radius(s.rho, grid, spec.n))


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    functionals: object
    Qk: float
    conservation_drift: float
    min_u: float
    min_Hk: float
    max_F: float
    tau: float
    step_count: int = 0
    dQk_dt_estimate: float = float("nan")
    dissipation: tuple = ()
    Hk_minus1: float = field(default=float("nan"), repr=False)


def normal_speed(frame, curv, config):
    """Nodewise normal speed ``F`` for the configured flow."""
    k = config.k
    if callable(config.speed):
        return np.asarray(config.speed(frame, curv, config), dtype=float)
    Hk = curv.H[..., k]
    if np.any(Hk <= config.convexity_floor):
        raise ConvexityLost(f"H_{k} fell to {np.min(Hk):.3e} (floor {config.convexity_floor:g})")
    F = curv.H[..., k - 1] / Hk
    if config.speed == NORMALIZED:
        F = F - frame.u
    return F


def _rate(rho, grid, config):
    sample = sample_radius(rho, grid, config.n)
    fr, cd = surface_geometry(sample)
    if np.any(fr.u <= config.starshape_floor):
        raise StarShapeLost(f"support function fell to {np.min(fr.u):.3e}")
    F = normal_speed(fr, cd, config)
    return F * fr.v / rho, sample, fr, cd, F


def _stable_dt(rho, rate, sample, fr, cd, config):
    """Largest step allowed by parabolic stability, CFL and the relative-change cap."""
    grid = sample.grid
    h = grid.h
    n, k = config.n, config.k
    dt = config.dt_initial
    if callable(config.speed):
        sens_m = sens_p = np.abs(fr.r2 / fr.v)
    else:
        # dF/dkappa along the meridian and parallel directions, from
        # d sigma_j / d kappa_i = sigma_{j-1}(kappa | i)
        kap = fr.S[:, np.arange(n - 1), np.arange(n - 1)]
        Hk = cd.H[:, k]
        Hk1 = cd.H[:, k - 1]

        def dF(i):
            s = sigma_without(kap, i)
            dHk = s[:, k - 1] / comb(n - 1, k)
            dHk1 = s[:, k - 2] / comb(n - 1, k - 1) if k >= 2 else 0.0
            return np.abs((dHk1 * Hk - Hk1 * dHk) / Hk**2)

        sens_m, sens_p = dF(0), dF(1)
    d2_bound = 16.0 / 3.0 if grid.order == 4 else 4.0
    lam = (sens_m / fr.v**2) * d2_bound / h**2 + (n - 2) * (sens_p / (rho * fr.v)) * 2.0 / h**2
    lam_max = float(np.max(lam))
    if lam_max > 0:
        dt = min(dt, config.cfl_safety * _RK4_REAL_STABILITY / lam_max)
    speed = float(np.max(np.abs(rate)))
    if speed > 0:
        dt = min(dt, config.cfl_safety * h * float(np.min(rho)) / speed)
        dt = min(dt, config.max_relative_change * float(np.min(rho / np.abs(np.where(rate == 0, 1e-300, rate)))))
    return dt


def _rk4(rho, dt, grid, config, k1=None):
    if k1 is None:
        k1 = _rate(rho, grid, config)[0]
    k2 = _rate(rho + 0.5 * dt * k1, grid, config)[0]
    k3 = _rate(rho + 0.5 * dt * k2, grid, config)[0]
    k4 = _rate(rho + dt * k3, grid, config)[0]
    return rho + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def step(state, config, dt=None):
    """Advance ``state`` by one RK4 step.

    The step size is ``dt`` if given, else ``dt_initial`` for a
    non-adaptive config, else the adaptive limit.
    """
    _check_state(state, config)
    grid = state.sample.grid
    rho = state.sample.rho
    rate, sample, fr, cd, _ = _rate(rho, grid, config)
    if dt is None:
        dt = config.dt_initial if not config.adaptive else _stable_dt(rho, rate, sample, fr, cd, config)
    if dt < 1e-12:
        raise StepUnderflow(f"time step {dt:.3e} below 1e-12", t=state.t)
    new = _rk4(rho, dt, grid, config, rate)
    steps = state.step_count + 1
    if config.regrid_every and steps % config.regrid_every == 0:
        new = new / float(np.mean(new))
    return FlowState(sample_radius(new, grid, config.n), state.t + dt, steps, dt)


def _check_state(state, config):
    if state.sample.n != config.n:
        raise DimensionMismatch(f"state has n = {state.sample.n}, config n = {config.n}")


def diagnose(state, config, reference=None, with_tau=True):
    """Diagnostics of one state; ``reference`` is the initial ``int H_{k-1}``."""
    k = config.k
    sample = state.sample
    fr, cd = surface_geometry(sample)
    fs = functionals(sample, k, (fr, cd))
    Q = fs.Qk
    base = fs.IH(k - 1)
    ref = base if reference is None else reference
    F = normal_speed(fr, cd, config)
    tau = 0.0
    if with_tau:
        coarse = functionals(resample(sample, sample.grid.coarsened()), k)
        tau = abs(coarse.Qk - Q) + 64 * np.finfo(float).eps * abs(Q)
    dissipation = dissipation_terms(sample, k) if config.speed == NORMALIZED else ()
    return DiagnosticsRecord(
        t=state.t, functionals=fs, Qk=Q,
        conservation_drift=abs(base - ref) / abs(ref),
        min_u=float(np.min(fr.u)), min_Hk=float(np.min(cd.H[:, k])),
        max_F=float(np.max(np.abs(F))), tau=float(tau), step_count=state.step_count,
        dissipation=dissipation, Hk_minus1=base,
    )


def _with_rate_estimates(records):
    if len(records) < 2:
        return records
    t = np.array([r.t for r in records])
    q = np.array([r.Qk for r in records])
    dq = np.gradient(q, t)
    return [replace(r, dQk_dt_estimate=float(d)) for r, d in zip(records, dq)]


def run(spec, grid, config, record_every, on_record=None):
    """Evolve ``spec`` and return diagnostics every ``record_every`` units of flow time.

    Steps are shortened to land exactly on record times and on ``t_end``.
    ``on_record(state, record)``, if given, is called at every record.
    A terminal error is re-raised as :class:`FlowError` (or subclass) with
    ``.records`` holding the diagnostics collected so far.
    """
    if spec.n != config.n:
        raise DimensionMismatch(f"shape has n = {spec.n}, config n = {config.n}")
    if not record_every > 0:
        raise ValueError("record_every must be positive")
    state = FlowState.initial(spec, grid)
    return run_from(state, config, record_every, on_record)


def run_from(state, config, record_every, on_record=None):
    """Continue a flow from ``state``; see :func:`run`."""
    records = []
    try:
        first = diagnose(state, config)
        records.append(first)
        if on_record is not None:
            on_record(state, first)
        ref = first.Hk_minus1
        next_record = state.t + record_every
        while state.t < config.t_end - 1e-12 and state.step_count < config.max_steps:
            target = min(next_record, config.t_end)
            grid = state.sample.grid
            rho = state.sample.rho
            if config.adaptive:
                rate, sample, fr, cd, _ = _rate(rho, grid, config)
                dt = _stable_dt(rho, rate, sample, fr, cd, config)
            else:
                dt = config.dt_initial
            if target - state.t < dt * (1 + 1e-9):
                dt = target - state.t
            state = step(state, config, dt)
            if abs(state.t - target) <= 1e-12 * max(1.0, target):
                state = replace(state, t=target)
                rec = diagnose(state, config, ref)
                if config.regrid_every:
                    # rescaling breaks the conserved reference; Q_k is unaffected
                    rec = replace(rec, conservation_drift=float("nan"))
                records.append(rec)
                if on_record is not None:
                    on_record(state, rec)
                next_record = target + record_every
    except FlowError as exc:
        exc.t = state.t if exc.t is None else exc.t
        exc.records = _with_rate_estimates(records)
        raise
    return _with_rate_estimates(records)


class VariationResiduals(NamedTuple):
    """Residuals of the first-variation formulas along the flow.

    ``res_IH``: ``d/dt int H_{k-1}`` minus ``(n-k) int H_k F``;
    ``res_r2H``: ``d/dt int r^2 H_k`` minus
    ``int ((n-1-k) r^2 H_{k+1} + 2(k+1) u H_k - 2k H_{k-1}) F``;
    ``res_r2``: max over nodes of ``d r^2/dt`` (following the normal)
    minus ``2 F u``.
    """

    res_IH: float
    res_r2H: float
    res_r2: float


def _advance(state, config, dt):
    # exact-length advance made of stable substeps
    grid = state.sample.grid
    rho = state.sample.rho
    rate, sample, fr, cd, _ = _rate(rho, grid, config)
    limit = _stable_dt(rho, rate, sample, fr, cd, replace(config, dt_initial=dt))
    m = max(1, int(np.ceil(dt / limit - 1e-9)))
    for _ in range(m):
        rho = _rk4(rho, dt / m, grid, config)
    return sample_radius(rho, grid, config.n)


def _one_sided(f0, f1, f2, dt):
    return (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * dt)


def _normal_hit_r2(sample, new_sample, F, dt_guess):
    """Squared radius where each node's normal line meets ``new_sample``.

    Works in the meridian half-plane: ``X = rho e_r``, outward normal
    ``nu = (rho e_r - rho' e_phi) / v``.
    """
    rho = sample.rho
    r1 = sample.rho_d1[:, 0]
    phi = sample.phi
    v = np.sqrt(rho**2 + r1**2)
    z = rho * np.cos(phi)
    w = rho * np.sin(phi)
    nz = (rho * np.cos(phi) + r1 * np.sin(phi)) / v
    nw = (rho * np.sin(phi) - r1 * np.cos(phi)) / v
    coef = cosine_coefficients(new_sample.rho)

    def gap(s):
        Z, Wc = z + s * nz, w + s * nw
        return np.hypot(Z, Wc) - cosine_eval(coef, np.arctan2(Wc, Z))

    s0 = F * dt_guess
    s1 = s0 * 1.01 + 1e-12
    g0, g1 = gap(s0), gap(s1)
    for _ in range(50):
        denom = np.where(g1 == g0, 1.0, g1 - g0)
        s2 = np.where(g1 == g0, s1, s1 - g1 * (s1 - s0) / denom)
        s0, g0, s1 = s1, g1, s2
        g1 = gap(s1)
        if np.max(np.abs(g1)) < 1e-15 * np.max(rho):
            break
    return (z + s1 * nz) ** 2 + (w + s1 * nw) ** 2


def _variation_parts(sample, config):
    n, k = config.n, config.k
    fr, cd = surface_geometry(sample)
    F = normal_speed(fr, cd, config)
    H = cd.H
    Hk1 = H[:, k + 1] if k + 1 <= n - 1 else np.zeros_like(fr.u)
    I = lambda f: integrate(sample, f, fr)  # noqa: E731
    return {
        "IH": I(H[:, k - 1]),
        "Ir2H": I(fr.r2 * H[:, k]),
        "rhs_IH": (n - k) * I(H[:, k] * F),
        "rhs_r2H": I(((n - 1 - k) * fr.r2 * Hk1 + 2 * (k + 1) * fr.u * H[:, k] - 2 * k * H[:, k - 1]) * F),
        "F": F,
        "two_Fu": 2 * F * fr.u,
        "r2": fr.r2,
    }


def check_variation_formulas(state, config, dt_probe):
    """Compare one-sided second-order time differences with the variation formulas.

    The state is advanced by ``dt_probe`` and ``2 dt_probe``; residual
    magnitudes behave like ``O(dt_probe^2)`` plus a fixed grid error.
    """
    s0 = state.sample
    s1 = _advance(state, config, dt_probe)
    s2 = _advance(FlowState(s1, state.t + dt_probe), config, dt_probe)
    p0, p1, p2 = (_variation_parts(s, config) for s in (s0, s1, s2))
    d_IH = _one_sided(p0["IH"], p1["IH"], p2["IH"], dt_probe)
    d_Ir2H = _one_sided(p0["Ir2H"], p1["Ir2H"], p2["Ir2H"], dt_probe)
    r2_1 = _normal_hit_r2(s0, s1, p0["F"], dt_probe)
    r2_2 = _normal_hit_r2(s0, s2, p0["F"], 2 * dt_probe)
    d_r2 = _one_sided(p0["r2"], r2_1, r2_2, dt_probe)
    return VariationResiduals(
        d_IH - p0["rhs_IH"], d_Ir2H - p0["rhs_r2H"], float(np.max(np.abs(d_r2 - p0["two_Fu"]))),
    )


class MonotonicityTerms(NamedTuple):
    """Rate of the weighted functional and the three dissipation terms.

    ``newton_maclaurin`` is ``(n-1-k) int r^2 (H_{k+1} H_{k-1}/H_k - H_k)``,
    ``speed_square`` is ``-2 int H_k (H_{k-1}/H_k - u)^2`` and
    ``gradient_square`` is ``-1/2 int H_k |grad r^2|^2``.
    """

    lhs_rate: float
    newton_maclaurin: float
    speed_square: float
    gradient_square: float

    @property
    def rhs(self):
        return self.newton_maclaurin + self.speed_square + self.gradient_square


def dissipation_terms(sample, k):
    """The three non-positive terms whose sum is the rate of the weighted functional."""
    n = sample.n
    fr, cd = surface_geometry(sample)
    H = cd.H
    Hk = H[:, k]
    Hk1 = H[:, k + 1] if k + 1 <= n - 1 else np.zeros_like(Hk)
    c = grad_r2_covector(sample)
    grad_sq = np.einsum("ni,ni->n", c, np.linalg.solve(fr.g, c[..., None])[..., 0])
    I = lambda f: integrate(sample, f, fr)  # noqa: E731
    nm = (n - 1 - k) * I(fr.r2 * (Hk1 * H[:, k - 1] / Hk - Hk)) if n - 1 - k else 0.0
    sq = -2.0 * I(Hk * (H[:, k - 1] / Hk - fr.u) ** 2)
    gr = -0.5 * I(Hk * grad_sq)
    return nm, sq, gr


def check_monotonicity_identity(state, config, dt_probe=None):
    """Rate of ``int r^2 H_k + 2(k-1)/(n+1-k) int H_{k-2}`` against the three-term formula.

    The rate is a one-sided second-order finite difference in time, so it is
    independent of the analytic right side.
    """
    if config.speed != NORMALIZED:
        raise ValueError("the dissipation identity holds for the normalized flow")
    k = config.k
    if dt_probe is None:
        dt_probe = 1e-3
    s1 = _advance(state, config, dt_probe)
    s2 = _advance(FlowState(s1, state.t + dt_probe), config, dt_probe)
    vals = [functionals(s, k).scaled_lhs(k) for s in (state.sample, s1, s2)]
    rate = _one_sided(*vals, dt_probe)
    return MonotonicityTerms(rate, *dissipation_terms(state.sample, k))


def sphere_limit(n, k):
    return sphere_q_value(n, k)
