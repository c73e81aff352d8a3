"""Brute-force eigenpairs of finite sections, used to validate eigenderivatives.

The perturbed eigenpair of ``K + hJ`` on the branch through
``(lambda_i, e_i)`` is found by Newton's method on the bordered system

    (K + hJ) v - mu v = 0,    v_i = 1,

and central differences in ``h`` are compared against ``Lambda_i`` and
``Delta_i``.  Fixing ``v_i = 1`` (rather than ``||v|| = 1``) makes the
derivative of ``v`` have no ``e_i`` component, matching ``Delta_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PerturbedModel, SeriesVector, _check_gaps, delta_derivative, lambda_derivative
from .errors import NewtonDivergence, SingularBorderedSystem

__all__ = [
    "DenseModel",
    "PerturbedEigenpair",
    "ConvergenceReport",
    "truncate_model",
    "perturbed_eigenpair",
    "fd_lambda",
    "fd_delta",
    "convergence_study",
]

MAX_NEWTON_ITERATIONS = 50
ERROR_FLOOR = 1e-13


@dataclass(frozen=True)
class DenseModel:
    """Finite section: eigenvalues ``lam`` and ``jmat[i-1, j-1] = j[i, j]``."""

    lam: np.ndarray
    jmat: np.ndarray
    gap_min: float = 1e-12

    def __post_init__(self):
        lam = np.asarray(self.lam)
        jmat = np.asarray(self.jmat)
        if lam.ndim != 1 or jmat.shape != (lam.size, lam.size):
            raise ValueError("need M eigenvalues and an M x M coefficient matrix")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "jmat", jmat)
        # Validates pairwise gaps.
        object.__setattr__(self, "_model", PerturbedModel.from_dense(lam, jmat, gap_min=self.gap_min))

    @property
    def M(self) -> int:
        return self.lam.size

    def to_model(self) -> PerturbedModel:
        return self._model

    def matrix(self, h) -> np.ndarray:
        """``K + hJ``; column ``i`` of ``J`` is ``J e_i``, i.e. row ``i`` of ``jmat``."""
        return np.diag(self.lam) + h * self.jmat.T


@dataclass(frozen=True)
class PerturbedEigenpair:
    h: complex
    eigenvalue: complex
    eigenvector: np.ndarray
    iterations: int
    residual_norm: float


@dataclass(frozen=True)
class ConvergenceReport:
    rows: list
    fitted_order_lambda: float
    fitted_order_delta: float

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"h": h, "lambda_error": le, "delta_error": de} for h, le, de in self.rows
            ],
            "fitted_order_lambda": self.fitted_order_lambda,
            "fitted_order_delta": self.fitted_order_delta,
        }


def truncate_model(model: PerturbedModel, M: int) -> DenseModel:
    """The ``M x M`` leading section of ``model``."""
    if M < 2:
        raise ValueError("truncation dimension must be at least 2")
    if model.is_finite and M > model.dimension:
        raise ValueError(f"cannot truncate a {model.dimension}-dimensional model to {M}")
    idx = np.arange(1, M + 1)
    lam = model.eigenvalues(idx)
    for i in idx:
        others = idx[idx != i]
        _check_gaps(model, int(i), lam[i - 1], others, lam[others - 1])
    jmat = model.coefficients(idx[:, None], idx[None, :])
    return DenseModel(np.array(lam), np.array(jmat), gap_min=model.gap_min)


def perturbed_eigenpair(
    dense: DenseModel, i: int, h, newton_tol: float = 1e-12
) -> PerturbedEigenpair:
    """Eigenpair of ``K + hJ`` continuing ``(lambda_i, e_i)``, normalized so ``v_i = 1``.

    Converged when ``||(K + hJ) v - mu v|| <= newton_tol * (1 + |mu|) * ||v||``;
    one extra Newton step is then taken to polish the pair.

    Raises
    ------
    NewtonDivergence
        After 50 iterations without meeting the tolerance.
    SingularBorderedSystem
        When the bordered Jacobian cannot be factored (an eigenvalue
        collision at this ``h``).
    """
    M = dense.M
    a = dense.matrix(h)
    k = i - 1
    v = np.zeros(M, dtype=a.dtype)
    v[k] = 1.0
    mu = dense.lam[k].astype(a.dtype)
    jac = np.zeros((M + 1, M + 1), dtype=a.dtype)
    jac[M, k] = 1.0

    def residual(v, mu):
        return a @ v - mu * v

    r = residual(v, mu)
    res = float(np.linalg.norm(r))
    iterations = 0
    polished = False
    while True:
        met = res <= newton_tol * (1 + abs(mu)) * np.linalg.norm(v)
        if met and (polished or res == 0.0):
            break
        if iterations >= MAX_NEWTON_ITERATIONS:
            raise NewtonDivergence(iterations, res)
        polished = met
        jac[:M, :M] = a - mu * np.eye(M)
        jac[:M, M] = -v
        rhs = np.concatenate([-r, [0.0]])
        try:
            step = np.linalg.solve(jac, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularBorderedSystem(str(exc)) from exc
        if not np.all(np.isfinite(step)):
            raise SingularBorderedSystem("non-finite Newton step")
        v = v + step[:M]
        v[k] = 1.0
        mu = mu + step[M]
        r = residual(v, mu)
        res = float(np.linalg.norm(r))
        iterations += 1
        if not math.isfinite(res):
            raise NewtonDivergence(iterations, res)
    return PerturbedEigenpair(
        h=h,
        eigenvalue=mu.item(),
        eigenvector=v,
        iterations=iterations,
        residual_norm=res,
    )


def fd_lambda(dense: DenseModel, i: int, h: float):
    """Central difference ``(mu(h) - mu(-h)) / 2h`` of the tracked eigenvalue."""
    plus = perturbed_eigenpair(dense, i, h)
    minus = perturbed_eigenpair(dense, i, -h)
    return (plus.eigenvalue - minus.eigenvalue) / (2 * h)


def fd_delta(dense: DenseModel, i: int, h: float) -> SeriesVector:
    """Central difference of the ``v_i = 1`` normalized eigenvector."""
    plus = perturbed_eigenpair(dense, i, h)
    minus = perturbed_eigenpair(dense, i, -h)
    values = (plus.eigenvector - minus.eigenvector) / (2 * h)
    values[i - 1] = 0.0
    return SeriesVector(values)


def _fit_order(hs, errors) -> float:
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = errors > ERROR_FLOOR
    if keep.sum() < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(hs[keep]), np.log(errors[keep]), 1)
    return float(slope)


def convergence_study(dense: DenseModel, i: int, h_list) -> ConvergenceReport:
    """Finite-difference errors against ``Lambda_i`` and ``Delta_i`` over ``h_list``."""
    h_list = [float(h) for h in h_list]
    if len(h_list) < 3:
        raise ValueError("need at least three step sizes")
    if any(b >= a for a, b in zip(h_list, h_list[1:])) or h_list[-1] <= 0:
        raise ValueError("step sizes must be positive and strictly decreasing")
    model = dense.to_model()
    lam_exact = lambda_derivative(model, i)
    delta_exact = delta_derivative(model, i).delta.values
    rows = []
    for h in h_list:
        lam_err = abs(fd_lambda(dense, i, h) - lam_exact)
        delta_err = float(np.linalg.norm(fd_delta(dense, i, h).values - delta_exact))
        rows.append((h, float(lam_err), delta_err))
    return ConvergenceReport(
        rows=rows,
        fitted_order_lambda=_fit_order(h_list, [r[1] for r in rows]),
        fitted_order_delta=_fit_order(h_list, [r[2] for r in rows]),
    )
