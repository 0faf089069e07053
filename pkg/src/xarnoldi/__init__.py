"""Extrapolated restarted k-step Arnoldi for the dominant eigenpair of sparse matrices."""

from .dense_eig import (
    ComplexDominantError,
    ConditioningError,
    EigenPairSet,
    QRConvergenceError,
    generalized_eigen,
    hessenberg_eigen,
    select_dominant,
)
from .diagnostics import (
    CostEstimate,
    ModeRatios,
    cost_estimate,
    gram_condition,
    mode_ratios,
    rayleigh_quotient,
    residual_norm,
)
from .krylov import (
    ArnoldiFactorization,
    KrylovProjection,
    RankDeficiencyError,
    arnoldi_factorization,
    assemble_kstep_output,
    mgs_orthonormalize,
    naive_kstep_projection,
    orthogonalized_kstep_projection,
)
from .matrix_core import (
    MatvecCounter,
    SparseMatrix,
    load_matrix_market,
    make_alternating_diag,
    make_inverse_iota_diag,
    matvec,
    normalize,
    read_matrix_market,
)
from .solver import (
    GammaStrategy,
    SolveConfig,
    SolveReport,
    block_kstep,
    extrapolated_kstep,
    gamma_value,
    lobpcg2_step,
    power_iteration,
    restarted_arnoldi,
)

__version__ = "0.1.0"
