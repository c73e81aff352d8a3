"""Existence conditions for eigenderivatives, reported as certificates.

Three checks are provided:

* :func:`definition_check` tests the two series the definition needs:
  ``Delta_i`` must converge in norm, and so must the second-order vector
  ``S_i`` (evaluated coordinate by coordinate).
* :func:`prop1_certificate` tests the sufficient condition "``J`` bounded,
  ``sup_j |j[i, j]|`` finite, ``sum_{j != i} 1/|lambda_i - lambda_j|``
  convergent" and records the majorant
  ``(||J|| + sup|j[i,j]|) * sup|j[i,j]| * gap_sum`` of ``||S_i||``.
* :func:`prop2_certificate` is the Hilbert-space specialization where
  ``j[i, j] = <J e_i, e_j>`` and the coefficient bound comes for free.

Series that stabilize within the policy window, or whose blocks shrink
geometrically, count as convergent for the definition check; series whose
blocks do not shrink count as divergent (``VIOLATED``).  The propositions
only accept a gap sum that actually stabilizes.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (
    PerturbationCoefficients,
    PerturbedModel,
    SeriesVector,
    _check_gaps,
    _delta_term,
    _policy_for,
    check_index,
    second_order_term,
)
from .errors import DimensionMismatch
from .series import (
    CONVERGED,
    DECAYING,
    NON_DECAYING,
    TailReport,
    TruncationPolicy,
    _accumulate,
    _abs2,
    adaptive_sum,
)

__all__ = [
    "CertificateKind",
    "Status",
    "Certificate",
    "gap_sum",
    "coefficient_sup",
    "definition_check",
    "prop1_certificate",
    "prop2_certificate",
    "coefficients_from_application",
    "row_sum_bound",
]


class CertificateKind(str, enum.Enum):
    DEFINITION = "definition"
    PROP1 = "prop1"
    PROP2 = "prop2"


class Status(str, enum.Enum):
    SATISFIED = "satisfied"
    VIOLATED = "violated"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Certificate:
    kind: CertificateKind
    status: Status
    gap_sum: float | None = None
    coeff_sup: float | None = None
    operator_norm_bound: float | None = None
    second_order_bound: float | None = None
    notes: str = ""
    details: dict = field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return self.status is Status.SATISFIED

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "status": self.status.value,
            "gap_sum": self.gap_sum,
            "coeff_sup": self.coeff_sup,
            "operator_norm_bound": self.operator_norm_bound,
            "second_order_bound": self.second_order_bound,
            "notes": self.notes,
            "details": self.details,
        }


def _status_from_trends(*trends: str) -> Status:
    if NON_DECAYING in trends:
        return Status.VIOLATED
    if all(t in (CONVERGED, DECAYING) for t in trends):
        return Status.SATISFIED
    return Status.INCONCLUSIVE


def gap_sum(model: PerturbedModel, i: int, policy: TruncationPolicy | None = None):
    """``sum_{j != i} 1 / |lambda_i - lambda_j|`` and its tail report."""
    i = check_index(model, i)
    lam_i = model.eigenvalues(np.array([i]))[0]

    def term(j):
        return 1.0 / np.abs(_check_gaps(model, i, lam_i, j, model.eigenvalues(j)))

    value, tail = adaptive_sum(term, i, _policy_for(model, policy), stop=model.dimension)
    return float(value), tail


def coefficient_sup(model: PerturbedModel, i: int, policy: TruncationPolicy | None = None):
    """Running maximum of ``|j[i, j]|`` over the policy window (``j = i`` included).

    Only finite models and models declaring monotone coefficient rows get
    ``converged=True``; otherwise the window value is a lower bound.
    """
    i = check_index(model, i)
    policy = policy or TruncationPolicy()
    n = model.dimension if model.is_finite else policy.max_terms
    j = np.arange(1, n + 1)
    sup = float(np.max(np.abs(model.coefficients(i, j))))
    certain = model.is_finite or model.perturbation.monotone
    tail = TailReport(
        terms_used=n,
        last_block_delta=0.0 if certain else math.inf,
        converged=certain,
        trend=CONVERGED if certain else "stalled",
    )
    return sup, tail


def definition_check(
    model: PerturbedModel, i: int, policy: TruncationPolicy | None = None
) -> Certificate:
    """Do the series defining ``Delta_i`` and ``S_i`` converge?

    ``S_i`` is evaluated with ``policy.nested()`` windows.  The absolute
    convergence of ``sum |c_j|`` is reported in ``details`` but does not
    affect the status.
    """
    i = check_index(model, i)
    policy = policy or TruncationPolicy()
    pol = _policy_for(model, policy)
    c = _delta_term(model, i)
    delta_sq, delta_tail = _accumulate(c, i, pol, model.dimension, transform=_abs2)
    _, abs_tail = _accumulate(c, i, pol, model.dimension, transform=np.abs)
    s = second_order_term(model, i, policy)
    outer, inner = s.tail, s.tail.inner
    trends = [delta_tail.trend, outer.trend] + ([inner.trend] if inner is not None else [])
    status = _status_from_trends(*trends)

    notes = []
    if delta_tail.trend == NON_DECAYING:
        notes.append("Delta series does not converge in norm")
    if inner is not None and inner.trend == NON_DECAYING:
        notes.append("a coordinate series of S_i diverges")
    if outer.trend == NON_DECAYING:
        if inner is not None and inner.trend in (CONVERGED, DECAYING):
            notes.append("every coordinate of S_i converges but its partial norms keep growing")
        else:
            notes.append("partial norms of S_i keep growing")
    if status is Status.INCONCLUSIVE:
        notes.append("no stabilization within the truncation window")
    return Certificate(
        kind=CertificateKind.DEFINITION,
        status=status,
        notes="; ".join(notes),
        details={
            "delta_norm_squared": float(delta_sq),
            "delta_tail": delta_tail.to_dict(),
            "delta_absolutely_convergent": abs_tail.trend in (CONVERGED, DECAYING),
            "second_order_tail": outer.to_dict(),
        },
    )


def _bound_is_finite(bound) -> bool:
    return bound is not None and math.isfinite(bound)


def prop1_certificate(
    model: PerturbedModel,
    i: int,
    operator_norm_bound: float | None,
    policy: TruncationPolicy | None = None,
) -> Certificate:
    """Sufficient condition: bounded ``J``, bounded row coefficients, summable inverse gaps.

    ``operator_norm_bound`` is the caller's asserted bound on ``||J||``;
    ``None`` or ``inf`` means no bound is known.
    """
    i = check_index(model, i)
    gsum, gtail = gap_sum(model, i, policy)
    sup, stail = coefficient_sup(model, i, policy)
    bounded = _bound_is_finite(operator_norm_bound)
    notes = []
    if gtail.converged and stail.converged and bounded:
        status = Status.SATISFIED
    elif gtail.trend == NON_DECAYING:
        status = Status.VIOLATED
        notes.append("inverse-gap sum diverges")
    else:
        status = Status.INCONCLUSIVE
        if not gtail.converged:
            notes.append("inverse-gap sum did not stabilize")
    if not bounded:
        notes.append("no finite bound on ||J|| supplied")
    if not stail.converged:
        notes.append("coefficient supremum not certified beyond the window")
    second = None
    if gtail.converged and bounded:
        second = (operator_norm_bound + sup) * sup * gsum
    return Certificate(
        kind=CertificateKind.PROP1,
        status=status,
        gap_sum=gsum if gtail.converged else None,
        coeff_sup=sup,
        operator_norm_bound=operator_norm_bound if bounded else None,
        second_order_bound=second,
        notes="; ".join(notes),
        details={"gap_tail": gtail.to_dict(), "partial_gap_sum": gsum},
    )


def prop2_certificate(
    model: PerturbedModel,
    i: int,
    operator_norm_bound: float | None,
    policy: TruncationPolicy | None = None,
) -> Certificate:
    """Hilbert-space criterion: bounded ``J`` and summable inverse gaps.

    With an orthonormal eigenbasis ``|j[i, j]| = |<J e_i, e_j>| <= ||J||``,
    so no separate coefficient condition is needed; a window supremum above
    the asserted bound means the assertion is false.
    """
    i = check_index(model, i)
    gsum, gtail = gap_sum(model, i, policy)
    sup, _ = coefficient_sup(model, i, policy)
    bounded = _bound_is_finite(operator_norm_bound)
    notes = []
    if bounded and sup > operator_norm_bound * (1 + 1e-12):
        status = Status.VIOLATED
        notes.append("asserted ||J|| is below sup_j |<J e_i, e_j>|")
    elif gtail.converged and bounded:
        status = Status.SATISFIED
    elif gtail.trend == NON_DECAYING:
        status = Status.VIOLATED
        notes.append("inverse-gap sum diverges")
    else:
        status = Status.INCONCLUSIVE
        if not gtail.converged:
            notes.append("inverse-gap sum did not stabilize")
    if not bounded:
        notes.append("no finite bound on ||J|| supplied")
    lam_deriv = model.coefficients(i, i).item()
    return Certificate(
        kind=CertificateKind.PROP2,
        status=status,
        gap_sum=gsum if gtail.converged else None,
        coeff_sup=sup,
        operator_norm_bound=operator_norm_bound if bounded else None,
        notes="; ".join(notes),
        details={
            "gap_tail": gtail.to_dict(),
            "partial_gap_sum": gsum,
            "lambda_derivative": lam_deriv,
        },
    )


def coefficients_from_application(
    apply: Callable[[int], SeriesVector], dimension: int | None
) -> PerturbationCoefficients:
    """Coefficients ``j[i, j] = <J e_i, e_j>`` read off ``apply(i) = J e_i``.

    ``apply`` is called once per row (memoized).  Coordinates past the
    stored part of ``apply(i)`` are zero.
    """

    @functools.lru_cache(maxsize=None)
    def row(i: int) -> SeriesVector:
        v = apply(i)
        if dimension is not None and len(v) > dimension and np.any(v.values[dimension:]):
            raise DimensionMismatch(
                f"J e_{i} has coordinates beyond dimension {dimension}"
            )
        return v

    def coefficient(i, j):
        i, j = np.broadcast_arrays(np.asarray(i), np.asarray(j))
        rows = [row(int(r)) for r in np.unique(i)]
        dtype = np.result_type(float, *(r.values.dtype for r in rows))
        out = np.zeros(i.shape, dtype=dtype)
        for r in np.unique(i):
            mask = i == r
            out[mask] = row(int(r)).padded(int(j[mask].max()))[j[mask] - 1]
        return out

    return PerturbationCoefficients(coefficient, dimension)


def row_sum_bound(model: PerturbedModel) -> float:
    """``max_i sum_j |j[i, j]|`` of a finite model.

    Bounds every column norm ``||J e_i||``, which is all the second-order
    majorant uses.
    """
    if not model.is_finite:
        raise ValueError("row sums need a finite model")
    n = model.dimension
    idx = np.arange(1, n + 1)
    return float(np.abs(model.coefficients(idx[:, None], idx[None, :])).sum(axis=1).max())
