"""Star-shaped shapes, sphere grids and sampled radius functions.

A star-shaped hypersurface is the radial graph ``X = rho(theta) * theta`` over
the unit sphere S^{n-1}.  Every shape here is rotationally symmetric about an
axis, so it is described by a profile ``f(psi)`` where ``psi`` is the polar
angle from that axis.  Derivatives are stored covariantly with respect to the
round metric, expressed in a round-orthonormal frame at each node: index 0 is
the meridian (``d/dphi``) direction and the remaining ``n - 2`` indices are
unit parallel directions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DimensionMismatch, NonPositiveRadius, UnsupportedMode

# Below this value of sin(psi) a node is treated as lying on the symmetry axis.
_AXIS_EPS = 1e-10


@dataclass(frozen=True)
class ShapeSpec:
    """Base class of the analytic initial shapes.

    ``n`` is the ambient dimension.  ``axis`` is the unit symmetry axis; it
    may differ from the z axis only for ``n = 3`` on a full 2-D grid.
    """

    n: int = field(kw_only=True)
    axis: tuple = field(default=(0.0, 0.0, 1.0), kw_only=True)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise DimensionMismatch(f"ambient dimension must be an integer >= 3, got {self.n}")
        axis = np.asarray(self.axis, dtype=float)
        if axis.shape != (3,) or not np.isclose(np.linalg.norm(axis), 1.0, atol=1e-12):
            raise ValueError(f"axis must be a unit 3-vector, got {self.axis}")
        if self.tilted and self.n != 3:
            raise DimensionMismatch("a tilted symmetry axis requires n = 3")

    @property
    def tilted(self):
        return tuple(self.axis) != (0.0, 0.0, 1.0)

    def profile(self, psi):
        """Return ``(f, f', f'')`` of the radius as a function of polar angle."""
        raise NotImplementedError

    def scaled(self, lam):
        """The shape dilated by ``lam`` about the origin."""
        raise NotImplementedError

    @property
    def analytic(self):
        return True


@dataclass(frozen=True)
class Sphere(ShapeSpec):
    radius: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not self.radius > 0:
            raise NonPositiveRadius(f"sphere radius must be positive, got {self.radius}")

    def profile(self, psi):
        psi = np.asarray(psi, dtype=float)
        return np.full_like(psi, self.radius), np.zeros_like(psi), np.zeros_like(psi)

    def scaled(self, lam):
        return Sphere(self.radius * lam, n=self.n, axis=self.axis)


@dataclass(frozen=True)
class AxisymEllipsoid(ShapeSpec):
    """Ellipsoid with semi-axis ``a`` along the symmetry axis and ``b`` across it."""

    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not (self.a > 0 and self.b > 0):
            raise NonPositiveRadius(f"semi-axes must be positive, got a={self.a}, b={self.b}")

    def profile(self, psi):
        psi = np.asarray(psi, dtype=float)
        if self.a == self.b:
            return Sphere(self.a, n=self.n).profile(psi)
        c = 1.0 / self.b**2 - 1.0 / self.a**2
        q = np.cos(psi) ** 2 / self.a**2 + np.sin(psi) ** 2 / self.b**2
        q1 = c * np.sin(2 * psi)
        q2 = 2 * c * np.cos(2 * psi)
        f = q**-0.5
        f1 = -0.5 * q**-1.5 * q1
        f2 = 0.75 * q**-2.5 * q1**2 - 0.5 * q**-1.5 * q2
        return f, f1, f2

    def scaled(self, lam):
        return AxisymEllipsoid(self.a * lam, self.b * lam, n=self.n, axis=self.axis)


@dataclass(frozen=True)
class PerturbedSphere(ShapeSpec):
    """``rho(psi) = R + sum_m eps_m cos(m psi)``.

    The amplitudes must satisfy ``sum |eps_m| (1 + m^2) < R``, which keeps
    the graph star-shaped with computable curvature.
    """

    radius: float = 1.0
    modes: tuple = ()

    def __post_init__(self):
        super().__post_init__()
        modes = tuple((int(m), float(e)) for m, e in self.modes)
        object.__setattr__(self, "modes", modes)
        if not self.radius > 0:
            raise NonPositiveRadius(f"base radius must be positive, got {self.radius}")
        for m, _ in modes:
            if m < 1:
                raise ValueError(f"perturbation modes must be >= 1, got {m}")
        budget = sum(abs(e) * (1 + m * m) for m, e in modes)
        if not budget < self.radius:
            raise NonPositiveRadius(
                f"perturbation too large: sum |eps|(1+m^2) = {budget:g} >= R = {self.radius:g}"
            )

    def profile(self, psi):
        psi = np.asarray(psi, dtype=float)
        f = np.full_like(psi, self.radius)
        f1 = np.zeros_like(psi)
        f2 = np.zeros_like(psi)
        for m, eps in self.modes:
            f = f + eps * np.cos(m * psi)
            f1 = f1 - eps * m * np.sin(m * psi)
            f2 = f2 - eps * m * m * np.cos(m * psi)
        return f, f1, f2

    def scaled(self, lam):
        return PerturbedSphere(
            self.radius * lam, tuple((m, e * lam) for m, e in self.modes), n=self.n, axis=self.axis
        )


@dataclass(frozen=True)
class TabulatedProfile(ShapeSpec):
    """Profile given by samples ``(phi, rho)`` with ``phi`` in ``[0, pi]``.

    Values are interpolated by a cubic spline through the even reflections
    of the table about both poles; derivatives on a grid come from finite
    differences of the interpolated values.
    """

    phi: tuple = ()
    rho: tuple = ()

    def __post_init__(self):
        super().__post_init__()
        phi = np.asarray(self.phi, dtype=float)
        rho = np.asarray(self.rho, dtype=float)
        if phi.ndim != 1 or phi.shape != rho.shape or phi.size < 4:
            raise ValueError("tabulated profile needs at least 4 matching (phi, rho) samples")
        if np.any(np.diff(phi) <= 0) or phi[0] < 0 or phi[-1] > np.pi:
            raise ValueError("tabulated phi must be strictly increasing within [0, pi]")
        if np.any(rho <= 0):
            raise NonPositiveRadius("tabulated radius must be positive")
        object.__setattr__(self, "phi", tuple(phi.tolist()))
        object.__setattr__(self, "rho", tuple(rho.tolist()))

    @property
    def analytic(self):
        return False

    @cached_property
    def _spline(self):
        phi = np.asarray(self.phi)
        rho = np.asarray(self.rho)
        lo = phi > 0
        hi = phi < np.pi
        x = np.concatenate([-phi[lo][::-1], phi, 2 * np.pi - phi[hi][::-1]])
        y = np.concatenate([rho[lo][::-1], rho, rho[hi][::-1]])
        return CubicSpline(x, y)

    def profile(self, psi):
        s = self._spline
        psi = np.asarray(psi, dtype=float)
        return s(psi), s(psi, 1), s(psi, 2)

    def scaled(self, lam):
        return TabulatedProfile(
            self.phi, tuple(r * lam for r in self.rho), n=self.n, axis=self.axis
        )


@dataclass(frozen=True)
class GridSpec:
    """Discretization of S^{n-1}.

    ``mode='axisym'`` uses ``n_phi`` cell-centred nodes over ``phi in [0, pi]``
    (any ``n``); ``mode='full2d'`` uses Gauss-Legendre nodes in ``cos(phi)``
    times ``n_theta`` uniform azimuths (``n = 3`` only).  ``order`` is the
    finite-difference order ``p``.
    """

    mode: str = "axisym"
    n_phi: int = 128
    n_theta: int | None = None
    order: int = 4

    def __post_init__(self):
        if self.mode not in ("axisym", "full2d"):
            raise ValueError(f"unknown grid mode {self.mode!r}")
        if self.order not in (2, 4):
            raise ValueError(f"differentiation order must be 2 or 4, got {self.order}")
        if self.n_phi < 16:
            raise ValueError(f"need at least 16 nodes in phi, got {self.n_phi}")
        if self.mode == "full2d":
            if self.n_theta is None or self.n_theta < 8 or self.n_theta % 2:
                raise ValueError("full2d grids need an even n_theta >= 8")
        elif self.n_theta is not None:
            raise ValueError("axisym grids take no n_theta")

    @classmethod
    def axisym(cls, n_phi, order=4):
        return cls("axisym", n_phi, None, order)

    @classmethod
    def full2d(cls, n_phi, n_theta, order=4):
        return cls("full2d", n_phi, n_theta, order)

    @property
    def size(self):
        return self.n_phi * (self.n_theta or 1)

    @property
    def h(self):
        """Uniform spacing in phi (axisym grids)."""
        return np.pi / self.n_phi

    def coarsened(self):
        """The grid with half the resolution, used for two-grid error estimates."""
        if self.mode == "axisym":
            return GridSpec.axisym(max(self.n_phi // 2, 16), self.order)
        n_theta = max(self.n_theta // 2, 8)
        return GridSpec.full2d(max(self.n_phi // 2, 16), n_theta + n_theta % 2, self.order)

    def refined(self, factor=2):
        if self.mode == "axisym":
            return GridSpec.axisym(self.n_phi * factor, self.order)
        return GridSpec.full2d(self.n_phi * factor, self.n_theta * factor, self.order)

    def nodes(self):
        """Return ``(phi, theta)`` flattened node coordinates (``theta`` is None for axisym)."""
        if self.mode == "axisym":
            return (np.arange(self.n_phi) + 0.5) * self.h, None
        x, _ = np.polynomial.legendre.leggauss(self.n_phi)
        phi = np.arccos(x[::-1])
        theta = 2 * np.pi * np.arange(self.n_theta) / self.n_theta
        P, T = np.meshgrid(phi, theta, indexing="ij")
        return P.ravel(), T.ravel()


@dataclass(frozen=True, eq=False)
class SurfaceSample:
    """Radius function and its round-covariant derivatives on a grid.

    ``rho_d1`` has shape ``(N, n-1)`` and ``rho_d2`` shape ``(N, n-1, n-1)``,
    both in the round-orthonormal frame.
    """

    grid: GridSpec
    n: int
    phi: np.ndarray
    theta: np.ndarray | None
    rho: np.ndarray
    rho_d1: np.ndarray
    rho_d2: np.ndarray
    spec: ShapeSpec | None = None

    @property
    def dim(self):
        return self.n - 1

    @property
    def size(self):
        return self.rho.size

    def scaled(self, lam):
        return SurfaceSample(
            self.grid, self.n, self.phi, self.theta, lam * self.rho, lam * self.rho_d1,
            lam * self.rho_d2, None if self.spec is None else self.spec.scaled(lam),
        )


def _check_positive(rho):
    if not np.all(np.isfinite(rho)) or np.any(rho <= 0):
        bad = int(np.argmin(np.where(np.isfinite(rho), rho, -np.inf)))
        raise NonPositiveRadius(f"radius not positive at node {bad}: {rho[bad]!r}")


def sample_shape(spec, grid):
    """Evaluate ``spec`` on ``grid``.

    Analytic variants get exact derivatives; a tabulated profile is
    interpolated to the nodes and differentiated with the grid's finite
    differences.
    """
    if grid.mode == "full2d" and spec.n != 3:
        raise DimensionMismatch(f"full2d grids require n = 3, got n = {spec.n}")
    if spec.tilted and grid.mode != "full2d":
        raise DimensionMismatch("a tilted symmetry axis needs a full2d grid")
    phi, theta = grid.nodes()
    if not spec.analytic:
        if grid.mode != "axisym":
            raise UnsupportedMode("tabulated profiles are supported on axisym grids only")
        rho = spec.profile(phi)[0]
        sample = sample_radius(rho, grid, spec.n)
        return SurfaceSample(
            grid, spec.n, phi, theta, sample.rho, sample.rho_d1, sample.rho_d2, spec
        )

    d = spec.n - 1
    if grid.mode == "axisym":
        f, f1, f2 = spec.profile(phi)
        _check_positive(f)
        d1 = np.zeros((phi.size, d))
        d1[:, 0] = f1
        diag = np.empty((phi.size, d))
        diag[:, 0] = f2
        diag[:, 1:] = (f1 / np.tan(phi))[:, None]
        d2 = np.zeros((phi.size, d, d))
        idx = np.arange(d)
        d2[:, idx, idx] = diag
        return SurfaceSample(grid, spec.n, phi, theta, f, d1, d2, spec)

    # full2d, n = 3: derivatives of f(psi(x)) through the polar angle to the axis
    a = np.asarray(spec.axis, dtype=float)
    sp, cp = np.sin(phi), np.cos(phi)
    st, ct = np.sin(theta), np.cos(theta)
    xhat = np.stack([sp * ct, sp * st, cp], axis=-1)
    e_phi = np.stack([cp * ct, cp * st, -sp], axis=-1)
    e_theta = np.stack([-st, ct, np.zeros_like(st)], axis=-1)
    c = np.clip(xhat @ a, -1.0, 1.0)
    gc = np.stack([e_phi @ a, e_theta @ a], axis=-1)
    psi = np.arccos(c)
    s = np.sqrt(np.maximum(1.0 - c * c, 0.0))
    f, f1, f2 = spec.profile(psi)
    _check_positive(f)
    on_axis = s < _AXIS_EPS
    safe_s = np.where(on_axis, 1.0, s)
    g1 = np.where(on_axis, np.where(c > 0, f2, -f2), f1 / safe_s)
    f1cot = np.where(on_axis, f2, g1 * c)
    d1 = -g1[:, None] * gc
    coef = np.where(on_axis, 0.0, (f2 - f1cot) / safe_s**2)
    d2 = f1cot[:, None, None] * np.eye(2) + coef[:, None, None] * gc[:, :, None] * gc[:, None, :]
    return SurfaceSample(grid, 3, phi, theta, f, d1, d2, spec)


# Centred finite-difference stencils (offsets -2..2) for p = 2 and p = 4.
_D1 = {2: np.array([0.0, -0.5, 0.0, 0.5, 0.0]), 4: np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12}
_D2 = {2: np.array([0.0, 1.0, -2.0, 1.0, 0.0]), 4: np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12}


def _pad_reflect(f, parity):
    """Extend a cell-centred [0, pi] array by two ghost nodes per pole.

    ``parity=+1`` continues ``f`` evenly across both poles, ``-1`` oddly.
    """
    left = parity * f[1::-1]
    right = parity * f[:-3:-1]
    return np.concatenate([left, f, right])


def _apply(stencil, fp, n):
    return sum(w * fp[j : j + n] for j, w in enumerate(stencil) if w != 0.0)


def diff_phi(f, h, order=4, parity=1):
    """First and second phi-derivatives of a cell-centred pole-symmetric field."""
    fp = _pad_reflect(np.asarray(f, dtype=float), parity)
    n = len(f)
    return _apply(_D1[order], fp, n) / h, _apply(_D2[order], fp, n) / h**2


def sample_radius(rho, grid, n, spec=None):
    """Build a sample from nodal radius values using finite differences.

    Only axisymmetric grids are supported: ``rho`` is continued evenly
    across both poles so that ``rho'(0) = rho'(pi) = 0``.
    """
    if grid.mode != "axisym":
        raise UnsupportedMode("finite-difference sampling is implemented for axisym grids only")
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (grid.n_phi,):
        raise DimensionMismatch(f"expected {grid.n_phi} radius values, got shape {rho.shape}")
    _check_positive(rho)
    phi, _ = grid.nodes()
    r1, r2 = diff_phi(rho, grid.h, grid.order)
    d = n - 1
    d1 = np.zeros((rho.size, d))
    d1[:, 0] = r1
    d2 = np.zeros((rho.size, d, d))
    idx = np.arange(d)
    d2[:, idx, idx] = np.concatenate([r2[:, None], np.repeat((r1 / np.tan(phi))[:, None], d - 1, 1)], 1)
    return SurfaceSample(grid, n, phi, None, rho, d1, d2, spec)


def cosine_coefficients(values):
    """Cosine-series coefficients of an even field sampled on a cell-centred grid."""
    values = np.asarray(values, dtype=float)
    N = values.size
    phi = (np.arange(N) + 0.5) * np.pi / N
    c = (2.0 / N) * np.cos(np.outer(np.arange(N), phi)) @ values
    c[0] *= 0.5
    return c


def cosine_eval(coef, phi):
    """Evaluate a cosine series ``sum_j c_j cos(j phi)`` at arbitrary angles."""
    phi = np.asarray(phi, dtype=float)
    return np.cos(np.multiply.outer(phi, np.arange(coef.size))) @ coef


def resample(sample, grid):
    """Spectrally interpolate an axisymmetric sample onto another axisym grid."""
    rho = cosine_eval(cosine_coefficients(sample.rho), grid.nodes()[0])
    return sample_radius(rho, grid, sample.n)


def binomial(d, j):
    return comb(d, j) if 0 <= j <= d else 0
