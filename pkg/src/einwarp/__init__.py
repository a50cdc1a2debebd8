"""Verification engine for Einstein hypersurfaces of warped products.

Computes curvature of coordinate metrics by finite differences, evaluates
the structure conditions tying a hypersurface datum to a warped ambient
I x_f Q^n(c), and constructs and numerically certifies the classified
Einstein example with three principal curvatures.
"""

from .classifier import (
    BuiltExample,
    CylinderReport,
    ThreeCurvatureSpec,
    SpreadResult,
    algebraic_laws_report,
    build_three_curvature_example,
    certify_example,
    constant_curvature_spread,
    cylinder_identities,
    nonconstancy_probes,
    run_parameter_sweep,
    sweep_specs,
    two_curvature_lcf_check,
    write_sweep_csv,
)
from .curvature import (
    CoordinateMetric,
    CurvatureBundle,
    CurvatureGrid,
    Fiber,
    MWPSpec,
    build_mwp_metric,
    curvature_grid,
    curvature_oracle,
    metric_grid,
    mwp_sectional_closed_form,
    orthonormal_frame,
    sectional_curvature,
    tensor_grid,
    weyl_norm,
)
from .errors import (
    ConstraintError,
    DegeneratePlaneError,
    DomainError,
    GeometryError,
    MarginError,
    SingularMetricError,
    WrongShapeError,
)
from .hypersurface import (
    AmbientInvariants,
    PrincipalSpectrum,
    StructureData,
    ambient_invariants,
    check_T_principal,
    check_id_system,
    check_log_derivative_link,
    check_multiplicity_laws,
    check_quadratics,
    check_theta_gradient,
    einstein_residual,
    frame_involutivity_residual,
    involutivity_residual,
    principal_decomposition,
    ricci_via_corollary,
    structure_residuals,
)
from .report import CheckResult, ResidualReport
from .scalarfun import (
    IntervalDomain,
    SmoothFn,
    const,
    cos,
    cosh,
    eval_with_derivatives,
    exp,
    fn_from_json,
    fn_to_json,
    ode_residual,
    sin,
    sinh,
    solve_f_ode,
    variable,
)
from .spaceform import SpaceFormChart, space_form_metric

__version__ = "0.1.0"
