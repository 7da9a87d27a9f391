"""Working-set coordinate descent for sparse generalized linear models.

Solves F(X beta) + sum_j g_j(beta_j) for smooth datafits and separable
penalties, convex or not, with Anderson-extrapolated coordinate descent
inside a growing working set.
"""

from .data import (
    Dataset,
    DesignMatrix,
    LibsvmParseError,
    Target,
    column_squared_norms,
    generate_correlated_gaussian,
    lambda_max,
    read_libsvm,
    scale_columns_to_sqrt_n,
    write_libsvm,
)
from .datafits import Logistic, Quadratic, QuadraticMultiTask, SVMDual, svm_primal_objective
from .penalties import (
    MCP,
    SCAD,
    Block,
    BoxIndicator,
    L1,
    L1L2,
    LHalf,
    SemiconvexityReport,
    semiconvexity_check,
)
from .solver import (
    ConvergenceTrace,
    FitResult,
    PathPoint,
    SolverConfig,
    anderson_extrapolate,
    build_working_set,
    fit,
    path_fit,
)
from .diagnostics import (
    DiagnosticError,
    GapCertificate,
    UnsupportedPenaltyError,
    anderson_rate_bound,
    cd_jacobian_spectral_radius,
    duality_gap,
    identification_epoch,
    measured_cd_contraction,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DesignMatrix",
    "Target",
    "LibsvmParseError",
    "read_libsvm",
    "write_libsvm",
    "generate_correlated_gaussian",
    "lambda_max",
    "column_squared_norms",
    "scale_columns_to_sqrt_n",
    "Quadratic",
    "Logistic",
    "QuadraticMultiTask",
    "SVMDual",
    "svm_primal_objective",
    "L1",
    "L1L2",
    "MCP",
    "SCAD",
    "LHalf",
    "BoxIndicator",
    "Block",
    "semiconvexity_check",
    "SemiconvexityReport",
    "SolverConfig",
    "FitResult",
    "ConvergenceTrace",
    "PathPoint",
    "fit",
    "path_fit",
    "anderson_extrapolate",
    "build_working_set",
    "duality_gap",
    "GapCertificate",
    "UnsupportedPenaltyError",
    "DiagnosticError",
    "identification_epoch",
    "cd_jacobian_spectral_radius",
    "anderson_rate_bound",
    "measured_cd_contraction",
]
