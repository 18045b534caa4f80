"""Damped-Newton and Ekeland-style descent solvers for global inversion of C^1 maps on R^n."""

from .descent import (
    DescentConfig,
    DescentTrace,
    IterationRecord,
    SolveReport,
    Stalled,
    Status,
    descent_drive,
    line_search,
    newton_direction,
    solve_pointwise,
)
from .linalg import LUFactors, SingularMatrix, inverse_spectral_norm, lu_factor, solve_linear
from .maps import (
    LinearizationEstimate,
    MapInstance,
    MapSpec,
    SingularJacobian,
    check_jacobian,
    estimate_inverse_bound,
    evaluate,
    jacobian,
    jacobian_fd,
    linearization_modulus,
    make_map,
)
from .right_inverse import (
    CompactSample,
    LiftReport,
    RightInverseState,
    Verdict,
    certify_pair,
    functional_step,
    lift_analysis,
    sample_segment_image,
    solve_right_inverse,
)

__version__ = "0.1.0"
