"""Adaptive cubic-regularization solvers with l1, l2 or linf regularizers.

The package splits into: norm primitives (``norms``), a dense symmetric
eigensolver (``linalg``), the shared model machinery (``model``), the
subproblem solver for cubic-regularized quadratics (``rqmin``), the outer
solvers (``driver``), built-in objectives and verification oracles
(``problems``) and the command-line front end (``cli``).
"""

from .driver import (
    ARTrace,
    IterationBudgetError,
    IterationRecord,
    ar1pgn_solve,
    ar2gn_solve,
    newton_step_probe,
)
from .linalg import EigenPair, eigh_jacobi, smallest_eigenpair, spectral_norm
from .model import (
    ARConfig,
    KAPPA_OMEGA,
    OmegaPsi,
    Problem,
    RegularizedQuadratic,
    StepCertificate,
    acceptance_ratio,
    certify_first_order_step,
    certify_step,
    model_value,
    psi_omega,
    taylor_decrease,
    taylor_eval,
    taylor_value,
    update_sigma,
)
from .norms import GeneralNorm, induced_norm_bounds, norm_by_name
from .problems import (
    BUILTIN_NAMES,
    DerivativeReport,
    GridOracleResult,
    builtin_problem,
    check_derivatives,
    grid_oracle,
    householder_matrix,
)
from .rqmin import (
    RqminResult,
    StepRecord,
    SubproblemBudgetError,
    cauchy_step,
    eigen_step,
    line_min,
    retraction_step,
    rqmin_solve,
    safeguard_alpha,
    step_radius_bounds,
)

__version__ = "0.1.0"
