"""Pointwise geometry of radial graphs: metric, second fundamental form,
principal curvatures, the curvature functions sigma_k / H_k and Newton tensors.

All routines are vectorised over the nodes of a :class:`SurfaceSample`.
Tensors are expressed in the round-orthonormal frame of the sample, so the
round metric is the identity and the induced metric is
``g = rho^2 I + d rho (x) d rho``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _faults
from .errors import InvalidK, SingularMetric, UnsupportedMode
from .shapes import binomial, diff_phi


@dataclass(frozen=True, eq=False)
class PointFrame:
    """Geometric data at one node (or, from :func:`frames`, all nodes stacked).

    Attributes
    ----------
    g, h, S : ndarray
        Induced metric, second fundamental form and shape operator
        ``S = g^{-1} h`` (row index up).
    kappa : ndarray
        Principal curvatures sorted ascending.
    v, u, r2 : ndarray
        Graph factor ``sqrt(rho^2 + |grad rho|^2)``, support function
        ``rho^2 / v`` and squared distance to the origin.
    area_weight : ndarray
        Density of the surface measure with respect to the round measure,
        ``v * rho^(n-2)``.
    """

    g: np.ndarray
    h: np.ndarray
    S: np.ndarray
    kappa: np.ndarray
    v: np.ndarray
    u: np.ndarray
    r2: np.ndarray
    area_weight: np.ndarray

    def __getitem__(self, node):
        return PointFrame(*(getattr(self, f)[node] for f in self.__dataclass_fields__))


@dataclass(frozen=True, eq=False)
class CurvatureData:
    """``sigma[..., j]`` and ``H[..., j]`` for ``j = 0..n-1``; ``T[k]`` for ``k = 0..n-2``."""

    sigma: np.ndarray
    H: np.ndarray
    T: list

    def convex_margin(self, k):
        """``min_{1<=i<=k} H_i`` nodewise; positive exactly where the surface is k-convex."""
        if k < 1:
            return np.full(self.H.shape[:-1], np.inf)
        return self.H[..., 1 : k + 1].min(axis=-1)

    def is_k_convex(self, k):
        return bool(np.all(self.convex_margin(k) > 0))


def frames(sample):
    """Compute the :class:`PointFrame` fields at every node of ``sample``."""
    rho = sample.rho
    a = sample.rho_d1
    d = sample.dim
    eye = np.eye(d)
    aa = a[:, :, None] * a[:, None, :]
    rho2 = rho * rho
    g = rho2[:, None, None] * eye + aa
    v = np.sqrt(rho2 + np.einsum("ni,ni->n", a, a))
    h = (rho2[:, None, None] * eye + 2 * aa - rho[:, None, None] * sample.rho_d2) / v[:, None, None]
    if _faults.active("flip_h_sign"):
        h = -h
    if sample.grid.mode == "axisym":
        gd = g[:, np.arange(d), np.arange(d)]
        if np.any(gd <= 0):
            raise SingularMetric("induced metric is not positive definite")
        kd = h[:, np.arange(d), np.arange(d)] / gd
        S = np.zeros_like(h)
        S[:, np.arange(d), np.arange(d)] = kd
        kappa = np.sort(kd, axis=-1)
    else:
        det_g = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] ** 2
        if np.any(det_g <= 0) or np.any(g[:, 0, 0] <= 0):
            raise SingularMetric("induced metric is not positive definite")
        S = np.linalg.solve(g, h)
        kappa = _generalized_eig2(g, h, det_g)
    return PointFrame(g, h, S, kappa, v, rho2 / v, rho2, v * rho ** (d - 1))


def point_frame(sample, node):
    """The :class:`PointFrame` at a single node."""
    return frames(sample)[node]


def _generalized_eig2(g, h, det_g):
    # roots of det(h - kappa g) = 0 for symmetric 2x2 pencils, ascending
    b = g[:, 0, 0] * h[:, 1, 1] + g[:, 1, 1] * h[:, 0, 0] - 2 * g[:, 0, 1] * h[:, 0, 1]
    det_h = h[:, 0, 0] * h[:, 1, 1] - h[:, 0, 1] ** 2
    disc = np.sqrt(np.maximum(b * b - 4 * det_g * det_h, 0.0))
    # det_g k^2 - b k + det_h = 0, numerically stable pair of roots
    q = 0.5 * (b + np.copysign(disc, b))
    safe_q = np.where(q == 0, 1.0, q)
    r1 = np.where(q == 0, 0.5 * b / det_g, safe_q / det_g)
    r2 = np.where(q == 0, 0.5 * b / det_g, det_h / safe_q)
    return np.sort(np.stack([r1, r2], axis=-1), axis=-1)


def sigma_all(kappa):
    """Elementary symmetric functions ``sigma_0..sigma_m`` of the last axis of ``kappa``.

    Uses the coefficient recurrence of ``prod_i (1 + kappa_i x)``.
    """
    kappa = np.asarray(kappa, dtype=float)
    m = kappa.shape[-1]
    sigma = np.zeros(kappa.shape[:-1] + (m + 1,))
    sigma[..., 0] = 1.0
    for i in range(m):
        k = kappa[..., i]
        sigma[..., 1 : i + 2] = sigma[..., 1 : i + 2] + k[..., None] * sigma[..., : i + 1]
    return sigma


def normalized(sigma):
    """``H_j = sigma_j / C(m, j)`` where ``m`` is the number of curvatures."""
    m = sigma.shape[-1] - 1
    top = m + 1 if _faults.active("binomial_off_by_one") else m
    return sigma / np.array([binomial(top, j) for j in range(m + 1)], dtype=float)


def newton_tensors(S, sigma):
    """Newton tensors ``T_0 = I``, ``T_k = sigma_k I - T_{k-1} S`` for ``k < dim``."""
    S = np.asarray(S, dtype=float)
    d = S.shape[-1]
    eye = np.broadcast_to(np.eye(d), S.shape)
    T = [eye.copy()]
    for k in range(1, d):
        T.append(sigma[..., k, None, None] * eye - T[-1] @ S)
    return T


def curvature(frame):
    sigma = sigma_all(frame.kappa)
    return CurvatureData(sigma, normalized(sigma), newton_tensors(frame.S, sigma))


def surface_geometry(sample):
    """Frames and curvature data for every node."""
    fr = frames(sample)
    return fr, curvature(fr)


def sigma_without(kappa, i):
    """``sigma_j(kappa | i)``: elementary symmetric functions with entry ``i`` removed."""
    return sigma_all(np.delete(np.asarray(kappa, dtype=float), i, axis=-1))


def newton_maclaurin_gap(H, k):
    """``H_k^2 - H_{k+1} H_{k-1}`` (non-negative for real curvatures)."""
    return H[..., k] ** 2 - H[..., k + 1] * H[..., k - 1]


def _check_k(n, k):
    if not 1 <= k <= n - 1:
        raise InvalidK(f"k must lie in 1..{n - 1} for n = {n}, got {k}")


def grad_r2_covector(sample):
    """Components of ``d(r^2) = 2 rho d rho`` in the round-orthonormal frame."""
    return 2 * sample.rho[:, None] * sample.rho_d1


def divergence_identity(sample, k):
    """Return ``(lhs, rhs)`` of ``div(T_{k-1} grad r^2) = 2((n-k) sigma_{k-1} - k sigma_k u)``.

    The divergence is discrete: the meridian component ``W`` of
    ``T_{k-1} grad r^2`` is differentiated with the grid's finite
    differences, and ``div W = W' + W (log sqrt(det g))'`` with the
    logarithmic derivative evaluated from the sample's derivatives.
    """
    n = sample.n
    _check_k(n, k)
    if sample.grid.mode != "axisym":
        raise UnsupportedMode("discrete surface divergence is implemented for axisym grids only")
    fr, cd = surface_geometry(sample)
    rho = sample.rho
    r1 = sample.rho_d1[:, 0]
    r2 = sample.rho_d2[:, 0, 0]
    grad_r2 = 2 * rho * r1 / fr.v**2
    W = cd.T[k - 1][:, 0, 0] * grad_r2
    dW, _ = diff_phi(W, sample.grid.h, sample.grid.order, parity=-1)
    dlog = (rho * r1 + r1 * r2) / fr.v**2 + (n - 2) * (r1 / rho + 1 / np.tan(sample.phi))
    lhs = dW + W * dlog
    rhs = 2 * ((n - k) * cd.sigma[:, k - 1] - k * cd.sigma[:, k] * fr.u)
    return lhs, rhs


def check_divergence_identity(sample, k):
    """Nodewise residual of the divergence identity; its max-norm is the reported error."""
    lhs, rhs = divergence_identity(sample, k)
    return lhs - rhs


def support_gradient_residual(sample):
    """Residual of ``grad u = S grad(r^2 / 2)`` along the meridian (axisym grids).

    ``grad u`` is taken by finite differences of the nodal support function,
    the right side from the shape operator.
    """
    if sample.grid.mode != "axisym":
        raise UnsupportedMode("support-gradient check is implemented for axisym grids only")
    fr = frames(sample)
    du, _ = diff_phi(fr.u, sample.grid.h, sample.grid.order)
    # covector components: (S^T d(r^2/2))_0 = S_00 * rho rho'
    rhs = fr.S[:, 0, 0] * sample.rho * sample.rho_d1[:, 0]
    return du - rhs
