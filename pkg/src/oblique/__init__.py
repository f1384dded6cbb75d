"""Numerical toolkit for oblique splittings of finite-dimensional spaces.

Core contents: generalized inverses with prescribed range/kernel complements
and their behavior under perturbation; coordinate operators identifying a
moving subspace with a graph over a base subspace; a one-step integrator that
reconstructs the submanifold tangent to a family of subspaces; charts for
fixed-rank matrix manifolds; and a CLI with reproducible verification suites.
"""

from .config import DEFAULTS, Numerics
from .errors import (
    BallError,
    CofinalBreach,
    ComplementError,
    DimensionError,
    EvalError,
    GridError,
    MembershipError,
    NewtonDivergence,
    NumericalError,
    StepError,
    ToolkitError,
    TransversalityError,
    UnknownSuite,
    ValidationError,
)
from .linalg import (
    Projector,
    Subspace,
    as_matrix,
    direct_sum_check,
    kernel_of,
    oblique_projector,
    op_norm,
    orth_basis,
    range_of,
    rank_of,
    subspace_distance,
)
from .geninv import (
    ConditionReport,
    GenInverse,
    ProbeReport,
    c_op,
    d_op,
    gi_from_complements,
    locally_fine_probe,
    moore_penrose,
    perturbed_gi,
    rank_class_preserved,
    seven_conditions,
)
from .families import (
    CoordinateOperator,
    DifferentiableMap,
    SubspaceFamily,
    cofinal_member,
    coordinate_operator,
    generalized_regular_probe,
    graph_subspace,
    grp_alpha,
    kernel_family,
)
from .frobenius import IntegralPatch, explicit_psi, integrate, tangency_check
from .opmanifold import (
    OperatorFamilyContext,
    alpha_operator_family,
    chart_d,
    chart_d_star,
    fixed_rank_chart_check,
    mx_basis,
    operator_context,
    operator_family,
    tangency_fixed_rank,
)

__version__ = "0.1.0"
