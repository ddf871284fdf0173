"""Surface quadrature, curvature integrals, the scale-invariant functional
``Q_k`` and residual reports for the geometric inequalities.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import gamma, pi

import numpy as np

from . import _faults
from .errors import InvalidK, NonFiniteIntegrand
from .geometry import _check_k, grad_r2_covector, surface_geometry
from .shapes import binomial, resample, sample_shape

# floor of the two-grid error estimate, in units of machine epsilon times the value
_ROUNDOFF_FACTOR = 64.0


def omega(m):
    """Area of the unit sphere S^m."""
    return 2 * pi ** ((m + 1) / 2) / gamma((m + 1) / 2)


@lru_cache(maxsize=None)
def _sine_moments(N, m):
    # M_j = int_0^pi cos(j phi) sin(phi)^m dphi, j < N, computed exactly
    j = np.arange(N)
    if m % 2 == 0:
        M = N + m + 8
        phi = (np.arange(2 * M) + 0.5) * pi / (2 * M)
        return np.cos(np.outer(j, phi)) @ np.sin(phi) ** m * (pi / (2 * M))
    x, w = np.polynomial.legendre.leggauss(N // 2 + m + 8)
    cheb = np.cos(np.outer(j, np.arccos(x)))
    return cheb @ (w * (1 - x * x) ** ((m - 1) // 2))


@lru_cache(maxsize=None)
def _axisym_weights(N, n):
    # weights for int_{S^{n-1}} G dA with G axisymmetric: exact for cosine
    # polynomials of degree < N in phi
    m = n - 2
    M = _sine_moments(N, m)
    phi = (np.arange(N) + 0.5) * pi / N
    coef = np.full(N, 2.0 / N)
    coef[0] = 1.0 / N
    w = np.cos(np.outer(phi, np.arange(N))) @ (coef * M)
    w = w * omega(n - 2)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=None)
def _full2d_weights(n_phi, n_theta):
    _, wx = np.polynomial.legendre.leggauss(n_phi)
    w = np.repeat(wx[::-1] * (2 * pi / n_theta), n_theta)
    w.setflags(write=False)
    return w


def round_weights(sample):
    """Quadrature weights for integrals over the unit sphere at the sample's nodes."""
    g = sample.grid
    if g.mode == "axisym":
        return _axisym_weights(g.n_phi, sample.n)
    return _full2d_weights(g.n_phi, g.n_theta)


def integrate(sample, f, frame=None):
    """Integrate the nodal scalar ``f`` over the surface with respect to ``dmu``."""
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise NonFiniteIntegrand("integrand has non-finite values")
    if frame is None:
        frame, _ = surface_geometry(sample)
    # np.sum reduces pairwise in a fixed order, independent of thread count
    return float(np.sum(round_weights(sample) * frame.area_weight * f))


@dataclass(frozen=True)
class FunctionalSet:
    """Global curvature integrals of one surface.

    ``I_H[j] = int H_j``, ``I_r2H[j] = int r^2 H_j`` and ``I_uH[j] = int u H_j``
    for ``j = 0..n-1``.  Use :meth:`IH` for the convention ``I_H[-1] = n Vol``.
    """

    n: int
    k: int
    I_H: tuple
    I_r2H: tuple
    I_uH: tuple
    vol: float
    omega: float
    Qk: float | None = None
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def area(self):
        return self.I_H[0]

    def IH(self, j):
        if j == -1:
            return self.n * self.vol
        return self.I_H[j]

    def scaled_lhs(self, k=None):
        """``int r^2 H_k + 2(k-1)/(n+1-k) int H_{k-2}``."""
        k = self.k if k is None else k
        return weighted_lhs(self, k)


def weighted_lhs(fs, k):
    n = fs.n
    lhs = fs.I_r2H[k]
    if not _faults.active("drop_qk_term"):
        lhs += 2 * (k - 1) / (n + 1 - k) * fs.IH(k - 2)
    return lhs


def q_functional(fs, k):
    """The scale-invariant quantity ``Q_k``; ``None`` when ``int H_{k-1} <= 0``."""
    n = fs.n
    base = fs.IH(k - 1)
    if not base > 0:
        return None
    return (base / fs.omega) ** (-(n - k + 1) / (n - k)) * weighted_lhs(fs, k)


def sphere_q_value(n, k):
    """Value of ``Q_k`` on round spheres, ``(n+k-1)/(n-k+1) omega_{n-1}``."""
    return (n + k - 1) / (n - k + 1) * omega(n - 1)


def functionals(sample, k, geometry=None):
    """All curvature integrals of ``sample`` together with ``Q_k``."""
    n = sample.n
    _check_k(n, k)
    fr, cd = geometry if geometry is not None else surface_geometry(sample)
    H = cd.H
    wmu = round_weights(sample) * fr.area_weight
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(wmu))):
        raise NonFiniteIntegrand("curvature integrands have non-finite values")
    I_H = tuple(float(np.sum(wmu * H[:, j])) for j in range(n))
    I_r2H = tuple(float(np.sum(wmu * fr.r2 * H[:, j])) for j in range(n))
    I_uH = tuple(float(np.sum(wmu * fr.u * H[:, j])) for j in range(n))
    vol = float(np.sum(wmu * fr.u)) / n
    fs = FunctionalSet(n, k, I_H, I_r2H, I_uH, vol, omega(n - 1))
    return FunctionalSet(n, k, I_H, I_r2H, I_uH, vol, fs.omega, q_functional(fs, k))


def minkowski_residual(sample, k):
    """``int u H_k - int H_{k-1}``."""
    fs = functionals(sample, k)
    return fs.I_uH[k] - fs.IH(k - 1)


def weighted_minkowski_terms(sample, k):
    """Both sides of the two weighted Minkowski-type identities.

    Returns a dict with ``lhs_a, rhs_a`` for
    ``int r^2 u H_k = int r^2 H_{k-1} + (2k C)^{-1} int T_{k-1}(grad r^2, grad r^2)``
    and ``lhs_b, rhs_b`` for
    ``int u^2 H_k = int u H_{k-1} + (4k C)^{-1} int T_{k-1}(S grad r^2, grad r^2)``
    with ``C = C(n-1, k)``, plus the two quadratic-form integrals.
    """
    n = sample.n
    _check_k(n, k)
    fr, cd = surface_geometry(sample)
    c = grad_r2_covector(sample)
    ginv_c = np.linalg.solve(fr.g, c[..., None])[..., 0]
    T = cd.T[k - 1]
    form_T = np.einsum("ni,nij,nj->n", c, T, ginv_c)
    form_TS = np.einsum("ni,nij,njl,nl->n", c, T, fr.S, ginv_c)
    top = n if _faults.active("binomial_off_by_one") else n - 1
    C = binomial(top, k)
    H = cd.H

    def I(f):
        return integrate(sample, f, fr)

    quad_T = I(form_T)
    quad_TS = I(form_TS)
    return {
        "lhs_a": I(fr.r2 * fr.u * H[:, k]),
        "rhs_a": I(fr.r2 * H[:, k - 1]) + quad_T / (2 * k * C),
        "lhs_b": I(fr.u**2 * H[:, k]),
        "rhs_b": I(fr.u * H[:, k - 1]) + quad_TS / (4 * k * C),
        "quad_T": quad_T,
        "quad_TS": quad_TS,
    }


def weighted_minkowski_residuals(sample, k):
    """``(res_a, res_b)``, the lhs-minus-rhs of the two weighted identities."""
    t = weighted_minkowski_terms(sample, k)
    return t["lhs_a"] - t["rhs_a"], t["lhs_b"] - t["rhs_b"]


INEQUALITIES = ("iso_1_1", "af_1_2", "km_1_3", "gr_1_4", "km_1_5", "wz_1_6", "main_1_7")


@dataclass(frozen=True)
class ResidualReport:
    """``residual = lhs - rhs``; the inequality holds where ``residual >= 0``.

    ``tau`` is the two-grid discretization estimate of the residual and
    ``margin`` is ``min_nodes min_{i<=k} H_i`` (the k-convexity margin).
    """

    name: str
    n: int
    k: int | None
    j: int | None
    lhs: float
    rhs: float
    residual: float
    relative_margin: float
    tau: float
    star_shaped: bool
    k_convex: bool
    k1_convex: bool
    margin: float

    @property
    def hypotheses_ok(self):
        return self.star_shaped and self.k_convex

    @property
    def label(self):
        if self.name == "af_1_2":
            return f"af_1_2(j={self.j},k={self.k})"
        if self.k is None:
            return self.name
        return f"{self.name}(k={self.k})"


def _sides(fs, which, k, j):
    n = fs.n
    w = fs.omega
    if which == "iso_1_1":
        return fs.area / w, (fs.vol / (w / n)) ** ((n - 1) / n)
    if which == "af_1_2":
        return fs.I_H[k] / w, (fs.I_H[j] / w) ** ((n - 1 - k) / (n - 1 - j))
    if which == "km_1_3":
        return fs.I_r2H[1], n * fs.vol
    if which == "gr_1_4":
        return fs.I_r2H[1], w * (fs.area / w) ** (n / (n - 1))
    if which == "km_1_5":
        return fs.I_r2H[k], fs.IH(k - 2)
    if which == "wz_1_6":
        return fs.I_r2H[k], w * (fs.I_H[k - 1] / w) ** ((n - k + 1) / (n - k))
    if which == "main_1_7":
        lhs = weighted_lhs(fs, k)
        rhs = (n + k - 1) / (n - k + 1) * w * (fs.IH(k - 1) / w) ** ((n - k + 1) / (n - k))
        return lhs, rhs
    raise ValueError(f"unknown inequality {which!r}; choose from {INEQUALITIES}")


def _validate(which, n, k, j):
    if which in ("iso_1_1", "km_1_3", "gr_1_4"):
        return {"km_1_3": 1, "gr_1_4": 1}.get(which), None
    if which == "af_1_2":
        if k is None or j is None or not 0 <= j < k <= n - 1:
            raise InvalidK(f"af_1_2 needs 0 <= j < k <= {n - 1}, got j={j}, k={k}")
        return k, j
    lo = 2 if which in ("km_1_5", "wz_1_6") else 1
    if k is None or not lo <= k <= n - 1:
        raise InvalidK(f"{which} needs k in {lo}..{n - 1} for n = {n}, got {k}")
    return k, None


def _coarse_sample(sample):
    grid = sample.grid.coarsened()
    if sample.spec is not None and sample.spec.analytic:
        return sample_shape(sample.spec, grid)
    if sample.grid.mode == "axisym":
        return resample(sample, grid)
    return None


def inequality_report(sample, which, k=None, j=None, coarse=None):
    """Evaluate one inequality on ``sample``.

    ``k`` (and ``j`` for the Alexandrov-Fenchel family) select the member of
    the family.  The report is produced even when the hypotheses fail.  The
    error estimate ``tau`` compares against a half-resolution sample
    (``coarse`` if given, otherwise derived from ``sample``).
    """
    n = sample.n
    if which not in INEQUALITIES:
        raise ValueError(f"unknown inequality {which!r}; choose from {INEQUALITIES}")
    k, j = _validate(which, n, k, j)
    kk = k or 1
    fr, cd = surface_geometry(sample)
    fs = functionals(sample, kk, (fr, cd))
    lhs, rhs = _sides(fs, which, k, j)
    if coarse is None:
        coarse = _coarse_sample(sample)
    tau = _ROUNDOFF_FACTOR * np.finfo(float).eps * (abs(lhs) + abs(rhs))
    if coarse is not None:
        cl, cr = _sides(functionals(coarse, kk), which, k, j)
        tau += abs(cl - lhs) + abs(cr - rhs)
    residual = lhs - rhs
    denom = max(abs(lhs), abs(rhs))
    margin = float(np.min(cd.convex_margin(kk)))
    k1 = min(kk + 1, n - 1)
    return ResidualReport(
        which, n, k, j, lhs, rhs, residual, residual / denom if denom > 0 else float("nan"),
        float(tau), bool(np.all(fr.u > 0)), margin > 0,
        bool(np.all(cd.convex_margin(k1) > 0)), margin,
    )


def all_reports(sample, coarse=None):
    """Every inequality and every valid family member for ``sample``."""
    n = sample.n
    if coarse is None:
        coarse = _coarse_sample(sample)
    out = [inequality_report(sample, "iso_1_1", coarse=coarse)]
    out += [
        inequality_report(sample, "af_1_2", k=k, j=j, coarse=coarse)
        for k in range(1, n) for j in range(k)
    ]
    out += [inequality_report(sample, w, coarse=coarse) for w in ("km_1_3", "gr_1_4")]
    for w in ("km_1_5", "wz_1_6"):
        out += [inequality_report(sample, w, k=k, coarse=coarse) for k in range(2, n)]
    out += [inequality_report(sample, "main_1_7", k=k, coarse=coarse) for k in range(1, n)]
    return out


def two_grid_tau(sample, fn):
    """Two-grid estimate ``|fn(sample) - fn(coarse)|`` plus a round-off floor."""
    value = fn(sample)
    coarse = _coarse_sample(sample)
    tau = _ROUNDOFF_FACTOR * np.finfo(float).eps * abs(value)
    if coarse is not None:
        tau += abs(fn(coarse) - value)
    return value, float(tau)
