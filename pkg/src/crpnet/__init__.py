"""Discrete review control and diffusion-scale verification for open processing networks
with complete resource pooling."""

__version__ = "0.1.0"

from .network import (  # noqa: E402
    DistributionSpec,
    NetworkSpec,
    StructuralError,
    ZeroRateError,
    check_moments,
    load_network,
    save_network,
    validate_network,
)
from .planner import (  # noqa: E402
    AssumptionError,
    StaticPlan,
    build_policy_matrix,
    compute_constants,
    compute_duals,
    make_static_plan,
    order_buffers,
    solve_static_plan,
    verify_assumptions,
)
from .policy import PolicyParams, ReviewPlan, make_plan, scale_parameters  # noqa: E402
from .simulator import Trajectory, run_baseline_trajectory, run_dr_trajectory  # noqa: E402

__all__ = [
    "AssumptionError", "DistributionSpec", "NetworkSpec", "PolicyParams", "ReviewPlan",
    "StaticPlan", "StructuralError", "Trajectory", "ZeroRateError", "build_policy_matrix",
    "check_moments", "compute_constants", "compute_duals", "load_network", "make_plan",
    "make_static_plan", "order_buffers", "run_baseline_trajectory", "run_dr_trajectory",
    "save_network", "scale_parameters", "solve_static_plan", "validate_network",
    "verify_assumptions",
]
