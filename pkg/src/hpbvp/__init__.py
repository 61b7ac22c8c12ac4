"""hp-adaptive Newton-Galerkin solver for 1D semilinear boundary value problems."""

from .adaptive import (
    NewtonConfig,
    NewtonState,
    RunLog,
    RunRecord,
    build_refinement_plan,
    dorfler_mark,
    initial_step,
    newton_solve,
    predicted_step,
    run,
    smoothness_indicator,
)
from .basis import LocalExpansion, QuadRule, eval_shape, gauss_rule, legendre_derivative, local_norms, to_legendre
from .estimator import (
    EstimatorReport,
    EstimatorWeights,
    build_report,
    dual_residual_oracle,
    element_indicators,
    linearization_indicator,
    shifted_iterate,
    total_estimate,
    weights,
)
from .fem import BandedSystem, SingularSystem, assemble, energy_norm, newton_transform, solve
from .mesh import (
    DofMap,
    FemFunction,
    HpMesh,
    RefineAction,
    RefinementPlan,
    apply_refinement,
    build_dof_map,
    interpolate_linear,
    shape_regularity,
    transfer,
    uniform_mesh,
    uniform_refinement,
)
from .problems import BoundaryLift, SemilinearProblem, builtin, homogenize

__all__ = [
    "BandedSystem",
    "BoundaryLift",
    "DofMap",
    "EstimatorReport",
    "EstimatorWeights",
    "FemFunction",
    "HpMesh",
    "LocalExpansion",
    "NewtonConfig",
    "NewtonState",
    "QuadRule",
    "RefineAction",
    "RefinementPlan",
    "RunLog",
    "RunRecord",
    "SemilinearProblem",
    "SingularSystem",
    "apply_refinement",
    "assemble",
    "build_dof_map",
    "build_refinement_plan",
    "build_report",
    "builtin",
    "dorfler_mark",
    "dual_residual_oracle",
    "element_indicators",
    "energy_norm",
    "eval_shape",
    "gauss_rule",
    "homogenize",
    "initial_step",
    "interpolate_linear",
    "legendre_derivative",
    "linearization_indicator",
    "local_norms",
    "newton_solve",
    "newton_transform",
    "predicted_step",
    "run",
    "shape_regularity",
    "shifted_iterate",
    "smoothness_indicator",
    "solve",
    "to_legendre",
    "total_estimate",
    "transfer",
    "uniform_mesh",
    "uniform_refinement",
    "weights",
]

__version__ = "0.1.0"
