"""fracap: numerics for s-parabolic geometry, fractional heat kernels,
Cantor-set Frostman measures, singular-integral potentials, and
LP-discretized caloric capacities."""

__version__ = "0.1.0"

from .psgeo import (  # noqa: F401
    PsBall,
    PsCube,
    PsPoint,
    bounding_cube,
    cube_diam,
    dilate,
    dyadic_cubes,
    hausdorff_content_upper,
    ps_dist,
    ps_norm,
)
from .errors import (  # noqa: F401
    AdmissibilityError,
    ConvergenceError,
    DimensionMismatchError,
    FracapError,
    KernelDomainError,
    MeasureFormatError,
    QuadratureError,
    SolverStallError,
    UnboundedError,
)
from .kernels import (  # noqa: F401
    FAMILIES,
    KernelSpec,
    QuadratureConfig,
    half_lap_profile,
    kernel_component_count,
    kernel_values,
    phi_profile,
    phi_profile_deriv,
    spatial_mass,
)
from .cantor import (  # noqa: F401
    CantorCube,
    CantorSpec,
    critical_lambda,
    critical_spec,
    generation,
    generation_corners,
    locate,
    natural_measure,
    nonself_delta,
    upper_corner,
    upper_corner_chain,
)
from .measures import (  # noqa: F401
    DiscreteMeasure,
    GrowthReport,
    frostman_lower_bound,
    growth_audit,
    total_mass,
)
from . import measures  # noqa: F401  (measures.save / measures.load)
from .potentials import (  # noqa: F401
    PotentialRequest,
    bmo_oscillation,
    cantor_restricted_maximal,
    dyadic_epsilons,
    maximal_potential,
    segment_potential_shells,
    truncated_potential,
)
from .capacity import (  # noqa: F401
    CapacityEstimate,
    CapacityProblem,
    LpInstance,
    ResolutionParams,
    build_lp,
    content_capacity_report,
    gamma_half_estimate,
    gamma_tilde_estimate,
    solve_lp,
    verify_estimate,
    write_lp_text,
)
