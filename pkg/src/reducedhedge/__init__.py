"""Reduced stochastic hedge ratios from pathwise sensitivities.

Given pathwise primitive sensitivities ``b`` and hedge-instrument
sensitivities ``A``, fit hedge ratios ``phi_j = sum_q xi[j, q] X_q`` in a small
empirical basis, either by minimising the full pathwise residual (empirical
L2) or by projected moment matching (Galerkin / Petrov-Galerkin).
"""

from .basis import (
    BasisSet,
    BasisSpec,
    Constant,
    Indicator,
    Monomial,
    Product,
    empirical_inner,
    evaluate_basis,
    gram,
    orthonormalize,
    path_indicator_basis,
    polynomial_spec,
    project,
)
from .diagnostics import (
    compare_formulations,
    pathwise_conditioning,
    pathwise_oracle_solve,
    regress_pathwise,
    residual_report,
)
from .errors import (
    BasisMismatchError,
    ConfigError,
    ConvergenceError,
    CorruptFileError,
    DimensionMismatchError,
    NonFiniteError,
    ReducedHedgeError,
    SingularSystemError,
)
from .reduce_ls import (
    NormalSystem,
    ResidualWeights,
    apply_design,
    apply_design_adjoint,
    assemble_normal,
    ls_objective,
)
from .reduce_projected import ProjectedSystem, assemble_galerkin, assemble_projected
from .solve import (
    RegularizationSpec,
    SolveReport,
    condition_estimate,
    fit_least_squares,
    fit_projected,
    solve_least_squares,
    solve_matrix_free,
    solve_reduced,
)
from .tensors import (
    FlatIndexMaps,
    HedgeCoefficients,
    HedgeRatioMatrix,
    PrimitiveSensitivities,
    SensitivityTensor,
    flatten_col,
    flatten_row,
    read_tensor,
    reconstruct_hedge,
    validate_problem,
    write_tensor,
)

__version__ = "0.1.0"
