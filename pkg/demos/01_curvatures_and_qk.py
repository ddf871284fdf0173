"""Curvatures, curvature integrals and Q_k on a few radial graphs.

Run with ``python demos/01_curvatures_and_qk.py``.
"""
import numpy as np

from icflow import (
    AxisymEllipsoid, GridSpec, PerturbedSphere, Sphere, functionals, sample_shape, sphere_q_value,
    surface_geometry,
)
from icflow import oracle

# %% Principal curvatures of a prolate ellipsoid in R^3.
# At the poles both curvatures equal b/a^2; at the equator they are 1/a and a/b^2.
spec = AxisymEllipsoid(1.0, 2.0, n=3)
sample = sample_shape(spec, GridSpec.axisym(129))
frame, curv = surface_geometry(sample)
print("kappa at first node :", frame.kappa[0])
print("kappa at equator    :", frame.kappa[64], "(expect 1, 0.25)")

# %% Q_k is scale invariant and equals (n+k-1)/(n-k+1) omega_{n-1} on round spheres.
for n in (3, 4, 5):
    for k in range(1, n):
        q = functionals(sample_shape(Sphere(1.7, n=n), GridSpec.axisym(128)), k).Qk
        print(f"n={n} k={k}  Q_k={q:.15f}  sphere value={sphere_q_value(n, k):.15f}")

# %% Away from spheres Q_k exceeds the sphere value.
for eps in (0.0, 0.05, 0.1, 0.15):
    s = sample_shape(PerturbedSphere(1.0, ((2, eps),), n=4), GridSpec.axisym(128))
    print(f"eps={eps:.2f}  Q_2 / sphere value = {functionals(s, 2).Qk / sphere_q_value(4, 2):.8f}")

# %% The library's integrals against an independent meridian-curve quadrature.
ref = oracle.ellipsoid_integrals(1.0, 2.0, 3)
fs = functionals(sample, 1)
for j in range(3):
    print(f"int H_{j}: library {fs.I_H[j]:.14f}  oracle {ref[f'I_H[{j}]']:.14f}")
print("rel. difference in volume:", abs(fs.vol - ref["vol"]) / ref["vol"])
