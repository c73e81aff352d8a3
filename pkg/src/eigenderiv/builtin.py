"""The two built-in infinite models and their closed forms.

Both live on ``L^2(0, inf)`` with the orthonormal basis of unit-interval
indicator functions ``f_n``, so coordinates are exact:

* ``EXAMPLE_1``: ``K f_n = n f_n`` and ``J f_n = sum_k f_k / sqrt(n + k)``
  (``J`` unbounded).
* ``EXAMPLE_2``: ``K f_n = f_n / n`` and ``J f_n = sum_k f_k / (n + k)``
  (``J`` bounded).
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .core import Eigensystem, PerturbationCoefficients, PerturbedModel
from .series import TailReport, TruncationPolicy, adaptive_sum, adaptive_sum_squares, monotone_tail_bound

__all__ = [
    "ExampleId",
    "BUILTIN_NAMES",
    "example_model",
    "example_lambda_derivative",
    "example_delta_norm",
    "example2_boundedness",
    "example1_unboundedness_evidence",
    "example1_unbounded",
    "figure_data",
]


class ExampleId(enum.Enum):
    EXAMPLE_1 = 1
    EXAMPLE_2 = 2

    @classmethod
    def parse(cls, value) -> ExampleId:
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "_")
        for name, which in BUILTIN_NAMES.items():
            if key in (name, f"example{which.value}", f"example_{which.value}", str(which.value)):
                return which
        raise ValueError(f"unknown builtin model {value!r}")


BUILTIN_NAMES = {
    "paper_example_1": ExampleId.EXAMPLE_1,
    "paper_example_2": ExampleId.EXAMPLE_2,
}


def _ex1_lambda(n):
    return np.asarray(n, dtype=float)


def _ex1_coeff(n, k):
    return 1.0 / np.sqrt(np.asarray(n + k, dtype=float))


def _ex2_lambda(n):
    return 1.0 / np.asarray(n, dtype=float)


def _ex2_coeff(n, k):
    return 1.0 / np.asarray(n + k, dtype=float)


def example_model(which) -> PerturbedModel:
    which = ExampleId.parse(which)
    if which is ExampleId.EXAMPLE_1:
        lam, coeff = _ex1_lambda, _ex1_coeff
    else:
        lam, coeff = _ex2_lambda, _ex2_coeff
    name = {v: k for k, v in BUILTIN_NAMES.items()}[which]
    return PerturbedModel(
        Eigensystem(lam, None),
        PerturbationCoefficients(coeff, None, monotone=True),
        name=name,
    )


def example_lambda_derivative(which, i: int) -> float:
    """Closed form: ``1/sqrt(2i)`` (example 1) or ``1/(2i)`` (example 2)."""
    which = ExampleId.parse(which)
    if which is ExampleId.EXAMPLE_1:
        return float(1.0 / np.sqrt(float(2 * i)))
    return 1.0 / float(2 * i)


def example_delta_norm(which, i: int, policy: TruncationPolicy | None = None):
    """``||Delta_i||`` from its closed-form series.

    Example 1: ``sqrt(sum_{j != i} 1 / ((j - i)**2 (i + j)))``.
    Example 2: ``i * sqrt(sum_{j != i} j**2 / (j**2 - i**2)**2)``.

    Returns ``(norm, tail)``; the tail carries an integral bound on the
    omitted squared mass.
    """
    which = ExampleId.parse(which)
    if which is ExampleId.EXAMPLE_1:
        def term(j):
            j = j.astype(float)
            return 1.0 / ((j - i) ** 2 * (i + j))

        value, tail = adaptive_sum(term, i, policy, decay_exponent=3.0)
        return math.sqrt(value), tail

    def term(j):
        j = j.astype(float)
        return j * j / (j * j - float(i) ** 2) ** 2

    value, tail = adaptive_sum(term, i, policy, decay_exponent=2.0)
    return i * math.sqrt(value), tail


def example2_boundedness(n_max: int, k_max: int) -> float:
    """Largest column norm ``||J f_n||`` of example 2 over ``n <= n_max``.

    Each column is the partial sum over ``k <= k_max`` plus the integral
    bound ``1 / (n + k_max)`` on the rest, so the result is an upper bound.
    """
    if n_max < 1 or k_max < 1:
        raise ValueError("n_max and k_max must be positive")
    t = np.arange(1, n_max + k_max + 1, dtype=float)
    cumulative = np.concatenate([[0.0], np.cumsum(1.0 / (t * t))])
    n = np.arange(1, n_max + 1)
    partial = cumulative[n + k_max] - cumulative[n]
    last = 1.0 / (n + k_max).astype(float) ** 2
    tails = monotone_tail_bound(last, 2.0, n + k_max)
    return float(np.sqrt(partial + tails).max())


def example1_unboundedness_evidence(n: int, k_max: int) -> float:
    """Partial squared norm ``sum_{k <= k_max} 1 / (n + k)`` of ``J f_n`` in example 1."""
    k = np.arange(1, k_max + 1, dtype=float)
    return math.fsum(1.0 / (n + k))


def example1_unbounded(n: int, policy: TruncationPolicy | None = None) -> TailReport:
    """Tail report of ``||J f_n||**2`` for example 1; never converges."""
    _, tail = adaptive_sum(lambda k: 1.0 / (n + k.astype(float)), None, policy)
    return tail


def figure_data(which, i_range: tuple[int, int], policy: TruncationPolicy | None = None):
    """Rows ``(i, ||Delta_i||, ||Delta_i|| / i)`` for ``lo <= i <= hi``."""
    lo, hi = i_range
    rows = []
    for i in range(lo, hi + 1):
        norm, _ = example_delta_norm(which, i, policy)
        rows.append((i, norm, norm / i))
    return rows
