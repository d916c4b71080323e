"""Sub-Riemannian geometry of the affine-additive group, stretch maps and 4-modulus."""

from .core import (
    IDENTITY,
    InvalidPoint,
    LogCylPoint,
    NonHorizontalTangent,
    Point,
    Tangent,
    contact_form_eval,
    frame_at,
    from_logcyl,
    group_inv,
    group_mul,
    haar_density,
    horizontal_norm,
    logcyl_jacobian_det,
    to_logcyl,
)
from .curves import (
    Density,
    Foliation,
    HorizontalCurve,
    NonHorizontalCurve,
    foliation_volume_residual,
    horizontal_length,
    horizontality_residual,
    line_integral,
)
from .maps import (
    DegenerateDerivative,
    MapUnderTest,
    NotQuasiconformalAtPoint,
    ZeroVelocity,
    analytic_qc_ratio,
    beltrami,
    contact_residual,
    dh_norm,
    distortion,
    distortion_sq,
    horizontal_derivatives,
    jacobian_mu,
    msp_indicator,
    pushforward_speed,
)
from .modulus import (
    FoliationInvalid,
    ModulusProblem,
    ModulusResult,
    build_problem,
    check_admissibility,
    discrete_modulus,
    extremal_density_modulus,
    image_family_modulus,
    mean_distortion,
    quasi_invariance_check,
)
from .stretch import (
    InvalidParameters,
    PerturbationLeavesDomain,
    Scenario,
    f_minus_one,
    g_k_planar,
    identity_map,
    linear_stretch,
    make_scenario,
    radial_stretch,
    sample_connecting_family,
)
from .verify import open_question_report, verify_linear, verify_radial

__version__ = "0.1.0"
