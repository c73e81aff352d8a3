"""Operator models in eigenbasis coordinates and their eigenderivatives.

A model is the pair ``(K, J)``: the eigenvalues ``lambda_i`` of ``K`` and
the expansion coefficients ``j[i, j]`` of ``J e_i = sum_j j[i, j] e_j``.
Eigenvectors are never materialized; ``e_i`` is the i-th coordinate vector
of an orthonormal basis, so every norm is the coordinate l2 norm.

Indices are 1-based throughout.  Eigenvalue and coefficient functions are
vectorized and must broadcast over integer arrays.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from dataclasses import field as dc_field
from typing import Callable, Mapping

import numpy as np

from .errors import DegenerateGap, IndexOutOfRange
from .series import (
    MAX_BLOCK_ELEMENTS,
    TailReport,
    TruncationPolicy,
    adaptive_sum_rows,
    merge_tails,
    _abs2,
    _accumulate,
)

__all__ = [
    "Field",
    "Eigensystem",
    "PerturbationCoefficients",
    "PerturbedModel",
    "SeriesVector",
    "EigenderivativeResult",
    "ResidualReport",
    "coefficient",
    "lambda_derivative",
    "delta_derivative",
    "apply_operator",
    "second_order_term",
    "residual_check",
    "vector_norm",
]


class Field(str, enum.Enum):
    REAL = "real"
    COMPLEX = "complex"


@dataclass(frozen=True)
class Eigensystem:
    """Eigenvalues of ``K``; ``dimension=None`` means countably infinite."""

    eigenvalue: Callable[[np.ndarray], np.ndarray]
    dimension: int | None = None


@dataclass(frozen=True)
class PerturbationCoefficients:
    """``coefficient(i, j)`` is the j-th coordinate of ``J e_i``.

    ``monotone`` declares that ``|j[i, j]|`` is non-increasing in ``j`` for
    every row, which lets a finite window certify ``sup_j |j[i, j]|``.
    """

    coefficient: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dimension: int | None = None
    monotone: bool = False


@dataclass(frozen=True)
class PerturbedModel:
    eigensystem: Eigensystem
    perturbation: PerturbationCoefficients
    field: Field = Field.REAL
    gap_min: float = 1e-12
    name: str | None = None
    # Dense arrays backing the generators, when the model came from matrices.
    dense: tuple[np.ndarray, np.ndarray] | None = dc_field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.eigensystem.dimension != self.perturbation.dimension:
            raise ValueError(
                f"eigensystem dimension {self.eigensystem.dimension} does not match "
                f"perturbation dimension {self.perturbation.dimension}"
            )
        if self.gap_min < 0:
            raise ValueError("gap_min must be non-negative")
        object.__setattr__(self, "field", Field(self.field))

    @classmethod
    def from_dense(cls, eigenvalues, coefficients, field=None, gap_min=1e-12, name=None):
        """Build a finite model; ``coefficients[i - 1, j - 1]`` is ``j[i, j]``.

        Pairwise eigenvalue gaps are validated here.
        """
        lam = np.array(eigenvalues)
        jmat = np.array(coefficients)
        if lam.ndim != 1 or jmat.shape != (lam.size, lam.size):
            raise ValueError(
                f"need N eigenvalues and an N x N coefficient matrix, got "
                f"{lam.shape} and {jmat.shape}"
            )
        if field is None:
            field = Field.COMPLEX if np.iscomplexobj(lam) or np.iscomplexobj(jmat) else Field.REAL
        field = Field(field)
        dtype = complex if field is Field.COMPLEX else float
        lam = lam.astype(dtype)
        jmat = jmat.astype(dtype)
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(jmat))):
            raise ValueError("eigenvalues and coefficients must be finite")
        lam.setflags(write=False)
        jmat.setflags(write=False)
        n = lam.size
        model = cls(
            Eigensystem(lambda idx: lam[np.asarray(idx) - 1], n),
            PerturbationCoefficients(
                lambda i, j: jmat[np.asarray(i) - 1, np.asarray(j) - 1], n
            ),
            field=field,
            gap_min=gap_min,
            name=name,
            dense=(lam, jmat),
        )
        for i in range(1, n + 1):
            others = np.delete(np.arange(1, n + 1), i - 1)
            _check_gaps(model, i, lam[i - 1], others, lam[others - 1])
        return model

    @property
    def dimension(self) -> int | None:
        return self.eigensystem.dimension

    @property
    def is_finite(self) -> bool:
        return self.dimension is not None

    def eigenvalues(self, idx) -> np.ndarray:
        return np.asarray(self.eigensystem.eigenvalue(np.asarray(idx, dtype=np.int64)))

    def coefficients(self, i, j) -> np.ndarray:
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        out = np.asarray(self.perturbation.coefficient(i, j))
        shape = np.broadcast_shapes(i.shape, j.shape)
        return out if out.shape == shape else np.broadcast_to(out, shape)

    def eigenvalue(self, i: int):
        check_index(self, i)
        return self.eigenvalues(np.array([i]))[0].item()


@dataclass(frozen=True)
class SeriesVector:
    """A vector in eigenbasis coordinates.

    ``values[k]`` is the coefficient of ``e_{k+1}``; coordinates past the end
    of ``values`` are zero.  ``tail`` describes the truncation that produced
    the vector, if any.
    """

    values: np.ndarray
    tail: TailReport | None = None

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 1:
            raise ValueError("SeriesVector values must be one-dimensional")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_mapping(cls, coefficients: Mapping[int, complex], tail=None) -> SeriesVector:
        if not coefficients:
            return cls(np.zeros(0), tail)
        if min(coefficients) < 1:
            raise ValueError("coordinates are 1-based")
        dtype = complex if any(isinstance(v, complex) for v in coefficients.values()) else float
        values = np.zeros(max(coefficients), dtype=dtype)
        for k, v in coefficients.items():
            values[k - 1] = v
        return cls(values, tail)

    @classmethod
    def basis(cls, i: int) -> SeriesVector:
        values = np.zeros(i)
        values[i - 1] = 1.0
        return cls(values)

    def __getitem__(self, index: int):
        if index < 1:
            raise IndexError("coordinates are 1-based")
        if index > self.values.size:
            return 0.0
        return self.values[index - 1].item()

    def __len__(self) -> int:
        return self.values.size

    @property
    def coefficients(self) -> dict[int, complex]:
        nz = np.flatnonzero(self.values)
        return {int(k) + 1: self.values[k].item() for k in nz}

    def padded(self, n: int) -> np.ndarray:
        out = np.zeros(max(n, self.values.size), dtype=self.values.dtype)
        out[: self.values.size] = self.values
        return out

    @property
    def converged(self) -> bool:
        return self.tail is None or self.tail.converged


@dataclass(frozen=True)
class EigenderivativeResult:
    index: int
    lambda_derivative: complex
    delta: SeriesVector
    policy_used: TruncationPolicy

    @property
    def converged(self) -> bool:
        return self.delta.converged


@dataclass(frozen=True)
class ResidualReport:
    index: int
    h: complex
    defect: float
    second_order_norm: float
    exactness_scale: float
    converged: bool = True

    @property
    def relative_defect(self) -> float:
        return self.defect / self.exactness_scale


def check_index(model: PerturbedModel, i) -> int:
    if int(i) != i or i < 1 or (model.is_finite and i > model.dimension):
        raise IndexOutOfRange(i, model.dimension if model.is_finite else "infinity")
    return int(i)


def _gap_threshold(model, lam_i, lam_j):
    scale = np.maximum(1.0, np.maximum(np.abs(lam_i), np.abs(lam_j)))
    return model.gap_min * scale


def _check_gaps(model, i, lam_i, j, lam_j):
    gap = lam_i - lam_j
    bad = np.abs(gap) < _gap_threshold(model, lam_i, lam_j)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise DegenerateGap(i, int(np.asarray(j).ravel()[k]), float(np.abs(gap).ravel()[k]))
    return gap


def _delta_term(model: PerturbedModel, i: int):
    """Vectorized ``j -> j[i, j] / (lambda_i - lambda_j)`` with gap checks."""
    lam_i = model.eigenvalues(np.array([i]))[0]

    def term(j):
        j = np.asarray(j)
        gap = _check_gaps(model, i, lam_i, j, model.eigenvalues(j))
        return model.coefficients(i, j) / gap

    return term


def _policy_for(model: PerturbedModel, policy: TruncationPolicy | None) -> TruncationPolicy:
    policy = policy or TruncationPolicy()
    if model.is_finite:
        return policy.exhaustive(model.dimension)
    return policy


def coefficient(model: PerturbedModel, i: int, j: int):
    """The j-th coordinate of ``J e_i``."""
    check_index(model, i)
    check_index(model, j)
    return model.coefficients(i, j).item()


def lambda_derivative(model: PerturbedModel, i: int):
    """First-order eigenvalue change: the diagonal coefficient ``j[i, i]``."""
    return coefficient(model, i, i)


def delta_derivative(
    model: PerturbedModel, i: int, policy: TruncationPolicy | None = None
) -> EigenderivativeResult:
    """First-order eigenvector change ``sum_{j != i} j[i,j] / (lambda_i - lambda_j) e_j``.

    Finite models are summed exhaustively.  For infinite models the window
    grows until ``sum |c_j|**2`` stabilizes or ``policy.max_terms`` is hit;
    non-convergence is reported through ``result.delta.tail``.

    Raises
    ------
    DegenerateGap
        If some ``|lambda_i - lambda_j|`` inside the window is below the
        model's gap threshold.
    """
    i = check_index(model, i)
    policy = policy or TruncationPolicy()
    _, tail, values = _accumulate(
        _delta_term(model, i),
        i,
        _policy_for(model, policy),
        model.dimension,
        transform=_abs2,
        keep=True,
    )
    if values.size < i:
        values = np.concatenate([values, np.zeros(i - values.size, dtype=values.dtype)])
    return EigenderivativeResult(
        index=i,
        lambda_derivative=lambda_derivative(model, i),
        delta=SeriesVector(values, tail),
        policy_used=policy,
    )


def _matvec_rows(model: PerturbedModel, support: np.ndarray, weights: np.ndarray, m: np.ndarray):
    """``sum_k weights[k] * j[support[k], m]`` for every output coordinate ``m``."""
    chunk = max(1, MAX_BLOCK_ELEMENTS // max(m.size, 1))
    out = np.zeros(m.size, dtype=np.result_type(weights, float))
    for start in range(0, support.size, chunk):
        rows = support[start : start + chunk]
        block = model.coefficients(rows[:, None], m[None, :])
        out = out + weights[start : start + chunk] @ block
    return out


def apply_operator(
    model: PerturbedModel,
    v: SeriesVector,
    policy: TruncationPolicy | None = None,
    out_terms: int | None = None,
) -> SeriesVector:
    """Coordinates of ``J v``: ``(J v)_m = sum_j v_j j[j, m]``.

    Each output coordinate is a finite sum over the support of ``v``.  The
    output window is the full dimension for finite models, ``out_terms``
    when given, and otherwise grows until ``||J v||`` stabilizes under
    ``policy.nested()``.
    """
    support = np.flatnonzero(v.values) + 1
    if model.is_finite and support.size and support[-1] > model.dimension:
        raise IndexOutOfRange(int(support[-1]), model.dimension)
    weights = v.values[support - 1]

    def term(m):
        return _matvec_rows(model, support, weights, m)

    policy = policy or TruncationPolicy()
    if model.is_finite:
        pol, stop = policy.exhaustive(model.dimension), model.dimension
    elif out_terms is not None:
        pol, stop = policy.exhaustive(out_terms), None
    else:
        pol, stop = policy.nested(), None
    _, tail, values = _accumulate(term, None, pol, stop, transform=_abs2, keep=True)
    return SeriesVector(values, tail)


def second_order_term(
    model: PerturbedModel,
    i: int,
    policy: TruncationPolicy | None = None,
    out_terms: int | None = None,
) -> SeriesVector:
    """The vector ``S_i = sum_{j != i} c_j (J - j[i,i]) e_j`` with ``c_j = j[i,j] / (lambda_i - lambda_j)``.

    Evaluated coordinate by coordinate,
    ``S_i[m] = sum_{j != i} c_j j[j, m] - [m != i] c_m j[i, i]``,
    with an outer window over ``m`` and, for every ``m``, an inner adaptive
    sum over ``j``.  Individual vectors ``J e_j`` may have infinite norm, so
    the term-wise vector sum is never formed.

    The returned tail describes the outer (norm) series; ``tail.inner`` is
    the worst case over the coordinate series.
    """
    i = check_index(model, i)
    policy = policy or TruncationPolicy()
    c = _delta_term(model, i)
    j_ii = lambda_derivative(model, i)
    if model.is_finite:
        inner_pol = outer_pol = policy.exhaustive(model.dimension)
    else:
        inner_pol = outer_pol = policy.nested()
        if out_terms is not None:
            outer_pol = policy.exhaustive(out_terms)

    def inner(m, j):
        return c(j) * model.coefficients(j, m)

    inner_tails: list[TailReport] = []

    def term(m):
        sums, tail = adaptive_sum_rows(inner, m, i, inner_pol, stop=model.dimension)
        inner_tails.append(tail)
        off = m != i
        if np.any(off):
            correction = j_ii * c(m[off])
            sums = np.asarray(sums).astype(np.result_type(sums, correction))
            sums[off] -= correction
        return sums

    stop = model.dimension
    _, tail, values = _accumulate(term, None, outer_pol, stop, transform=_abs2, keep=True)
    merged = merge_tails(t for t in inner_tails if t is not None)
    return SeriesVector(values, replace(tail, inner=merged))


def vector_norm(v: SeriesVector) -> float:
    """Coordinate l2 norm."""
    return float(np.sqrt(np.sum(_abs2(np.asarray(v.values)))))


def residual_check(
    model: PerturbedModel, i: int, h, policy: TruncationPolicy | None = None
) -> ResidualReport:
    """Defect of the first-order eigen-relation against its exact remainder.

    Computes ``r = (K + hJ)(e_i + h Delta_i) - (lambda_i + h Lambda_i)(e_i + h Delta_i) - h**2 S_i``
    in coordinates, with ``K w``, ``J w`` and ``S_i`` each evaluated
    independently.  For finite models ``||r||`` is pure roundoff.  Infinite
    models use the ``policy.nested()`` window for ``Delta_i`` and evaluate
    ``r`` on the same coordinates.
    """
    i = check_index(model, i)
    policy = policy or TruncationPolicy()
    work = policy if model.is_finite else policy.nested()
    result = delta_derivative(model, i, work)
    delta = result.delta
    n = model.dimension if model.is_finite else max(delta.values.size, i)

    w = delta.padded(n) * h
    w = w.astype(np.result_type(w, float))
    w[i - 1] = 1.0
    w_vec = SeriesVector(w)
    m = np.arange(1, n + 1)
    lam = model.eigenvalues(m)
    lam_i = lam[i - 1]
    jw = apply_operator(model, w_vec, policy, out_terms=n).padded(n)
    s = second_order_term(model, i, policy, out_terms=None if model.is_finite else n)
    s_vals = s.padded(n)[:n]

    lhs = lam * w + h * jw[:n]
    rhs = (lam_i + h * result.lambda_derivative) * w + h * h * s_vals
    defect = float(np.sqrt(np.sum(_abs2(lhs - rhs))))

    coeff_sup = float(np.max(np.abs(model.coefficients(i, m))))
    delta_norm = vector_norm(delta)
    scale = (1 + abs(h)) ** 2 * (1 + delta_norm) * (1 + abs(lam_i) + coeff_sup)
    inner = s.tail.inner if s.tail is not None else None
    converged = model.is_finite or (delta.converged and (inner is None or inner.converged))
    return ResidualReport(
        index=i,
        h=h,
        defect=defect,
        second_order_norm=vector_norm(s),
        exactness_scale=float(scale),
        converged=bool(converged),
    )
