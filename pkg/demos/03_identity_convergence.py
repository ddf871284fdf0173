"""Identity checks under grid refinement, and what an injected bug looks like.

The suites return Verdict objects; each holds the residual per grid rung and
the fitted convergence order.
"""
from icflow import AxisymEllipsoid, PerturbedSphere, SuiteConfig, run_identity_suite
from icflow._faults import inject_fault

cfg = SuiteConfig(shapes=(AxisymEllipsoid(1.0, 1.5, n=3), PerturbedSphere(1.0, ((3, 0.05),), n=3)),
                  ns=(3, 4), threads=2)


def show(verdicts):
    for v in verdicts:
        res = " ".join(f"{r: .1e}" for _, r in v.values)
        order = "" if v.order is None else f"order={v.order:.2f}"
        print(f"{v.status:5s} {v.check:22s} n={v.n} k={v.k}  [{res}] {order} {v.message}")


show(run_identity_suite(cfg))

# %% Swapping a binomial coefficient breaks the weighted identities at every
# resolution, so the residuals stall instead of decaying.
print("\nwith an off-by-one binomial:")
with inject_fault("binomial_off_by_one"):
    show([v for v in run_identity_suite(cfg) if v.check.startswith("weighted_minkowski")])
