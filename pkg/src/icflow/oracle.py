"""Independent reference computations.

Nothing here imports the rest of icflow.  Surfaces of revolution are handled
as plane meridian curves with textbook curvature formulas, integrals are
adaptive (scipy ``quad``), and the curvature algebra is brute force.
"""
from __future__ import annotations

import itertools
from math import comb, factorial, gamma, pi

import numpy as np
from scipy import integrate


def sphere_area(m):
    return 2 * pi ** ((m + 1) / 2) / gamma((m + 1) / 2)


def sigma_bruteforce(kappa, k):
    """``sigma_k`` as an explicit sum over all k-subsets."""
    if k == 0:
        return 1.0
    return float(sum(np.prod(c) for c in itertools.combinations(kappa, k)))


def _perm_sign(p):
    p = list(p)
    sign = 1
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def kronecker_delta(upper, lower):
    """Generalized Kronecker delta ``delta^{i_1..i_k}_{j_1..j_k}``."""
    k = len(upper)
    return float(np.linalg.det(np.array([[1.0 if upper[b] == lower[a] else 0.0 for b in range(k)] for a in range(k)]))) if k else 1.0


def sigma_kronecker(A, k):
    """``sigma_k(A) = (1/k!) delta^{i..}_{j..} A^{j_1}_{i_1} ... A^{j_k}_{i_k}`` (brute force)."""
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    if k == 0:
        return 1.0
    total = 0.0
    for I in itertools.product(range(d), repeat=k):
        if len(set(I)) < k:
            continue
        for p in itertools.permutations(range(k)):
            J = tuple(I[q] for q in p)
            prod = 1.0
            for a in range(k):
                prod *= A[I[a], J[a]]
            total += _perm_sign(p) * prod
    return total / factorial(k)


def newton_fd(A, k, step=1e-5):
    """Central finite-difference gradient ``d sigma_{k+1} / d A^j_i`` (returned as ``[i, j]``)."""
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    out = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            E = np.zeros((d, d))
            E[j, i] = step
            out[i, j] = (sigma_kronecker(A + E, k + 1) - sigma_kronecker(A - E, k + 1)) / (2 * step)
    return out


def _sigmas(km, kp, n):
    # kappa = (km, kp repeated n-2 times)
    m = n - 2
    return [comb(m, j) * kp**j + (km * comb(m, j - 1) * kp ** (j - 1) if j >= 1 else 0.0) for j in range(n)]


def ellipsoid_point(a, b, t):
    """Meridian data of the ellipsoid at parameter ``t``: ``(z, y)`` = ``(a cos t, b sin t)``."""
    z, y = a * np.cos(t), b * np.sin(t)
    q = np.sqrt(np.cos(t) ** 2 / a**2 + np.sin(t) ** 2 / b**2)
    km = a * b / (a**2 * np.sin(t) ** 2 + b**2 * np.cos(t) ** 2) ** 1.5
    kp = 1.0 / (b**2 * q)
    u = 1.0 / q
    ds = np.sqrt(a**2 * np.sin(t) ** 2 + b**2 * np.cos(t) ** 2)
    dr2 = 2 * (b**2 - a**2) * np.sin(t) * np.cos(t) / ds
    return {"y": y, "r2": z * z + y * y, "km": km, "kp": kp, "u": u, "ds": ds, "dr2_ds": dr2}


def perturbed_point(R, modes, t):
    """Meridian data of ``rho = R + sum eps cos(m t)`` as a plane curve ``(rho cos t, rho sin t)``."""
    rho = R + sum(e * np.cos(m * t) for m, e in modes)
    d1 = -sum(e * m * np.sin(m * t) for m, e in modes)
    d2 = -sum(e * m * m * np.cos(m * t) for m, e in modes)
    x, y = rho * np.cos(t), rho * np.sin(t)
    x1 = d1 * np.cos(t) - rho * np.sin(t)
    y1 = d1 * np.sin(t) + rho * np.cos(t)
    x2 = d2 * np.cos(t) - 2 * d1 * np.sin(t) - rho * np.cos(t)
    y2 = d2 * np.sin(t) + 2 * d1 * np.cos(t) - rho * np.sin(t)
    ds = np.hypot(x1, y1)
    nx, ny = y1 / ds, -x1 / ds
    km = (x1 * y2 - y1 * x2) / ds**3
    with np.errstate(invalid="ignore", divide="ignore"):
        kp = ny / y
    return {"y": y, "r2": rho * rho, "km": km, "kp": kp, "u": x * nx + y * ny, "ds": ds,
            "dr2_ds": 2 * rho * d1 / ds}


def _pole_safe(point_fn, t):
    # the parallel curvature is 0/0 on the axis; nudge off it
    eps = 1e-9
    return point_fn(min(max(t, eps), pi - eps))


def surface_integrals(point_fn, n, epsrel=1e-13):
    """Curvature integrals of a surface of revolution by adaptive quadrature.

    ``point_fn(t)`` returns meridian data for ``t in [0, pi]``.
    """
    w = sphere_area(n - 2)
    H_norm = [comb(n - 1, j) for j in range(n)]

    def integral(fn):
        def f(t):
            p = _pole_safe(point_fn, t)
            return w * p["y"] ** (n - 2) * p["ds"] * fn(p)

        val, _ = integrate.quad(f, 0.0, pi, epsabs=0.0, epsrel=epsrel, limit=2000)
        return val

    def H(p, j):
        return _sigmas(p["km"], p["kp"], n)[j] / H_norm[j]

    def sig_m(p, j):
        # sigma_j of the curvatures with the meridian one removed
        return comb(n - 2, j) * p["kp"] ** j

    out = {}
    for j in range(n):
        out[f"I_H[{j}]"] = integral(lambda p, j=j: H(p, j))
        out[f"I_r2H[{j}]"] = integral(lambda p, j=j: p["r2"] * H(p, j))
        out[f"I_uH[{j}]"] = integral(lambda p, j=j: p["u"] * H(p, j))
    out["vol"] = integral(lambda p: p["u"]) / n
    for k in range(1, n):
        out[f"quad_T[{k}]"] = integral(lambda p, k=k: sig_m(p, k - 1) * p["dr2_ds"] ** 2)
        out[f"quad_TS[{k}]"] = integral(lambda p, k=k: sig_m(p, k - 1) * p["km"] * p["dr2_ds"] ** 2)
    om = sphere_area(n - 1)
    for k in range(1, n):
        lower = n * out["vol"] if k == 1 else out[f"I_H[{k - 2}]"]
        lhs = out[f"I_r2H[{k}]"] + 2 * (k - 1) / (n + 1 - k) * lower
        base = out["I_H[0]"] if k == 1 else out[f"I_H[{k - 1}]"]
        rhs = (n + k - 1) / (n - k + 1) * om * (base / om) ** ((n - k + 1) / (n - k))
        out[f"main_1_7[{k}]"] = lhs - rhs
    return out


def ellipsoid_integrals(a, b, n):
    return surface_integrals(lambda t: ellipsoid_point(a, b, t), n)


def perturbed_integrals(R, modes, n):
    return surface_integrals(lambda t: perturbed_point(R, modes, t), n)
