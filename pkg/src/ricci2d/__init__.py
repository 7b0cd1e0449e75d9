"""ricci2d: conformal Ricci flow on the plane, d/dt e^u = lap u.

Solvers (explicit CFL and implicit Newton), the infinite-area existence
classifier, potential-function diagnostics, aperture estimation, and
rescaled convergence-to-flat evidence, with a CLI front end.
"""

__version__ = "0.1.0"

from .grid import (  # noqa: F401
    CARTESIAN,
    DIRICHLET_INITIAL,
    NEUMANN0,
    RADIAL,
    ConformalField,
    GridSpec,
    ScalarField,
    constant_field,
    read_snapshot,
    write_snapshot,
)
from .operators import grad_sq_euclid, laplacian, sup_norm  # noqa: F401
from .geometry import (  # noqa: F401
    ApertureEstimate,
    aperture,
    circle_length_radial,
    conformal_area,
    geodesic_radius_radial,
    scalar_curvature,
)
from .eikonal import geodesic_distance_field  # noqa: F401
from .scenarios import (  # noqa: F401
    DiagnosticsConfig,
    GaugeConfig,
    Scenario,
    SolverConfig,
    build,
    load_config,
    parse_config,
)
from .flow import (  # noqa: F401
    ExistenceVerdict,
    FlowState,
    RunResult,
    classify_global_existence,
    record_times,
    run_flow,
    step_explicit,
    step_implicit,
)
from .potential import (  # noqa: F401
    PotentialGauge,
    identity_residual,
    max_principle_check,
    monotone_quantity,
    solve_initial_potential,
)
from .potential_flow import (  # noqa: F401
    PotentialFlowState,
    equivalence_defect,
    reconstruct_u,
)
from .diagnostics import (  # noqa: F401
    DecayFit,
    FlatnessReport,
    RescaledState,
    ck_norm,
    fit_decay,
    flatness_verdict,
    gradient_invariance_check,
    rescale,
)
from .report import RunAnalysis, analyze_run  # noqa: F401
