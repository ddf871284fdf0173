"""Curvature integrals, weighted Minkowski-type inequalities and normalized
inverse curvature flows for star-shaped radial graphs in R^n."""
from .errors import (
    ConfigError, ConvexityLost, DimensionMismatch, FlowError, IcflowError, InvalidK,
    NonFiniteIntegrand, NonPositiveRadius, SingularMetric, StarShapeLost, StepUnderflow,
    UnsupportedMode,
)
from .shapes import (
    AxisymEllipsoid, GridSpec, PerturbedSphere, ShapeSpec, Sphere, SurfaceSample, TabulatedProfile,
    sample_radius, sample_shape,
)
from .geometry import (
    CurvatureData, PointFrame, check_divergence_identity, curvature, frames, newton_tensors,
    point_frame, sigma_all, surface_geometry,
)
from .integrals import (
    INEQUALITIES, FunctionalSet, ResidualReport, all_reports, functionals, inequality_report,
    integrate, minkowski_residual, omega, weighted_minkowski_residuals, q_functional, sphere_q_value,
)
from .flow import (
    NORMALIZED, UNNORMALIZED, DiagnosticsRecord, FlowConfig, FlowState, check_monotonicity_identity,
    check_variation_formulas, diagnose, normal_speed, run, run_from, step,
)
from .verification import (
    FlowFixture, SuiteConfig, Verdict, run_flow_suite, run_identity_suite, run_inequality_suite,
)

__version__ = "0.1.0"
