"""First-order eigenvalue and eigenvector perturbations ("eigenderivatives").

Operators are given in the coordinates of an orthonormal eigenbasis of the
unperturbed operator; see :mod:`eigenderiv.core`.
"""

from .core import (
    EigenderivativeResult,
    Eigensystem,
    Field,
    PerturbationCoefficients,
    PerturbedModel,
    ResidualReport,
    SeriesVector,
    apply_operator,
    coefficient,
    delta_derivative,
    lambda_derivative,
    residual_check,
    second_order_term,
    vector_norm,
)
from .errors import (
    DegenerateGap,
    DimensionMismatch,
    EigenderivError,
    IndexOutOfRange,
    InvalidExponent,
    NewtonDivergence,
    OracleFailure,
    SingularBorderedSystem,
)
from .series import (
    TailReport,
    TruncationPolicy,
    adaptive_sum,
    adaptive_sum_squares,
    monotone_tail_bound,
)

__version__ = "0.1.0"
