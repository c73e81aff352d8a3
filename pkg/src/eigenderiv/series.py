"""Adaptive summation of infinite series with truncation diagnostics.

Every sum over ``j = 1, 2, 3, ...`` in this package goes through
:func:`adaptive_sum` or one of its siblings.  Terms are evaluated in blocks
whose end points grow geometrically (``64, 128, 256, ...`` by default); the
sum is declared converged once the most recent block moves the accumulated
total by no more than ``rel_tol`` relative.

Term functions are vectorized: they receive a 1-D ``int64`` array of 1-based
indices and return an array of the same shape (a scalar is broadcast).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .errors import InvalidExponent

__all__ = [
    "TruncationPolicy",
    "TailReport",
    "adaptive_sum",
    "adaptive_sum_squares",
    "adaptive_sum_rows",
    "monotone_tail_bound",
    "merge_tails",
]

# Block-to-block magnitude ratios used to classify a non-converged series.
DECAY_RATIO = 0.9
GROWTH_RATIO = 0.99
# Blocks longer than this are summed with math.fsum.
COMPENSATED_THRESHOLD = 100_000
# Upper bound on the number of matrix entries materialized at once.
MAX_BLOCK_ELEMENTS = 1 << 22

CONVERGED = "converged"
DECAYING = "decaying"
NON_DECAYING = "non-decaying"
STALLED = "stalled"


@dataclass(frozen=True)
class TruncationPolicy:
    """How far and how finely an infinite series is summed.

    ``nested_max_terms`` caps both levels of a double series (operator
    applications to infinitely supported vectors, the second-order term),
    whose cost grows with the product of the two windows.
    """

    initial_terms: int = 64
    max_terms: int = 2**20
    rel_tol: float = 1e-10
    growth_factor: int = 2
    nested_max_terms: int = 2**12

    def __post_init__(self):
        if self.initial_terms < 1 or self.max_terms < 1 or self.nested_max_terms < 1:
            raise ValueError("term counts must be positive")
        if self.initial_terms > self.max_terms:
            raise ValueError("initial_terms must not exceed max_terms")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if int(self.growth_factor) != self.growth_factor or self.growth_factor < 2:
            raise ValueError("growth_factor must be an integer >= 2")

    def nested(self) -> TruncationPolicy:
        """The policy used for each level of a double series."""
        cap = min(self.max_terms, self.nested_max_terms)
        return replace(self, max_terms=cap, initial_terms=min(self.initial_terms, cap))

    def exhaustive(self, n: int) -> TruncationPolicy:
        """A single-block policy summing exactly ``n`` terms."""
        n = max(int(n), 1)
        return replace(self, initial_terms=n, max_terms=n)


@dataclass(frozen=True)
class TailReport:
    """Diagnostics describing where a series was cut off.

    ``last_block_delta`` is the magnitude of the final block relative to the
    accumulated total (zero when every term of a known finite support was
    summed).  ``trend`` classifies the block history: ``converged``,
    ``decaying`` (blocks shrink geometrically), ``non-decaying`` (blocks do
    not shrink, evidence of divergence) or ``stalled``.
    """

    terms_used: int
    last_block_delta: float
    converged: bool
    monotone_tail_bound: float | None = None
    block_ratios: tuple[float, ...] = ()
    trend: str = STALLED
    inner: TailReport | None = None

    def to_dict(self) -> dict:
        out = {
            "terms_used": self.terms_used,
            "last_block_delta": self.last_block_delta,
            "converged": self.converged,
            "trend": self.trend,
            "monotone_tail_bound": self.monotone_tail_bound,
        }
        if self.inner is not None:
            out["inner"] = self.inner.to_dict()
        return out


def _classify(converged: bool, ratios: Sequence[float]) -> str:
    if converged:
        return CONVERGED
    if len(ratios) < 2:
        return STALLED
    if all(r <= DECAY_RATIO for r in ratios):
        return DECAYING
    if all(r >= GROWTH_RATIO for r in ratios):
        return NON_DECAYING
    return STALLED


def merge_tails(tails: Iterable[TailReport]) -> TailReport | None:
    """Worst-case summary of several tail reports (e.g. one per coordinate)."""
    tails = list(tails)
    if not tails:
        return None
    trends = {t.trend for t in tails}
    if NON_DECAYING in trends:
        trend = NON_DECAYING
    elif trends <= {CONVERGED}:
        trend = CONVERGED
    elif trends <= {CONVERGED, DECAYING}:
        trend = DECAYING
    else:
        trend = STALLED
    bounds = [t.monotone_tail_bound for t in tails]
    return TailReport(
        terms_used=max(t.terms_used for t in tails),
        last_block_delta=max(t.last_block_delta for t in tails),
        converged=all(t.converged for t in tails),
        monotone_tail_bound=None if None in bounds else max(bounds),
        trend=trend,
    )


def _windows(policy: TruncationPolicy, stop: int | None) -> Iterator[tuple[int, int]]:
    """Inclusive 1-based index windows ``(lo, hi)`` of successive blocks."""
    cap = policy.max_terms if stop is None else min(policy.max_terms, stop)
    hi = min(policy.initial_terms, cap)
    lo = 1
    while True:
        yield lo, hi
        if hi >= cap:
            return
        lo = hi + 1
        hi = min(hi * policy.growth_factor, cap)


def _indices(lo: int, hi: int, skip: int | None) -> np.ndarray:
    idx = np.arange(lo, hi + 1, dtype=np.int64)
    if skip is not None and lo <= skip <= hi:
        idx = idx[idx != skip]
    return idx


def _evaluate(term: Callable, idx: np.ndarray) -> np.ndarray:
    values = np.asarray(term(idx))
    if values.shape != idx.shape:
        values = np.broadcast_to(values, idx.shape)
    return values


def _fsum(values: np.ndarray):
    if np.iscomplexobj(values):
        return complex(math.fsum(values.real), math.fsum(values.imag))
    return math.fsum(values)


def _block_sum(values: np.ndarray):
    if values.size > COMPENSATED_THRESHOLD:
        return _fsum(values)
    total = values.sum()
    return complex(total) if np.iscomplexobj(values) else float(total)


class _Neumaier:
    """Compensated running sum for real or complex values."""

    def __init__(self):
        self.parts = [[0.0, 0.0], [0.0, 0.0]]

    @staticmethod
    def _add(part, x):
        s, c = part
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        part[0], part[1] = t, c

    def add(self, value):
        if isinstance(value, complex):
            self._add(self.parts[0], value.real)
            self._add(self.parts[1], value.imag)
        else:
            self._add(self.parts[0], float(value))

    def value(self, as_complex: bool):
        re = self.parts[0][0] + self.parts[0][1]
        if as_complex:
            return complex(re, self.parts[1][0] + self.parts[1][1])
        return re


def _relative(block, total) -> float:
    if total == 0:
        return 0.0 if block == 0 else math.inf
    return abs(block) / abs(total)


def _ratio(prev: float, cur: float) -> float:
    if prev == 0:
        return 0.0 if cur == 0 else math.inf
    return cur / prev


def _accumulate(term, skip, policy, stop, transform=None, keep=False, decay_exponent=None):
    policy = policy or TruncationPolicy()
    acc = _Neumaier()
    is_complex = False
    history: list[float] = []
    kept: list[np.ndarray] = []
    converged = False
    delta = math.inf
    hi = 0
    last_magnitude = None
    for lo, hi in _windows(policy, stop):
        idx = _indices(lo, hi, skip)
        raw = _evaluate(term, idx)
        values = raw if transform is None else transform(raw)
        if keep:
            kept.append(raw if idx.size == hi - lo + 1 else np.insert(raw, skip - lo, 0))
        block = _block_sum(values)
        is_complex = is_complex or isinstance(block, complex)
        acc.add(block)
        total = acc.value(is_complex)
        delta = _relative(block, total)
        history.append(abs(block))
        if values.size:
            last_magnitude = float(np.abs(values[-1]))
        if stop is not None and hi >= stop:
            converged, delta = True, 0.0
            break
        if (skip is None or hi >= skip) and delta <= policy.rel_tol:
            converged = True
            break
    ratios = tuple(_ratio(a, b) for a, b in zip(history[-3:-1], history[-2:]))
    bound = None
    if decay_exponent is not None and last_magnitude is not None:
        bound = 0.0 if converged and stop is not None and hi >= stop else monotone_tail_bound(
            last_magnitude, decay_exponent, hi
        )
    tail = TailReport(
        terms_used=hi,
        last_block_delta=float(delta),
        converged=converged,
        monotone_tail_bound=bound,
        block_ratios=ratios,
        trend=_classify(converged, ratios),
    )
    total = acc.value(is_complex)
    if keep:
        return total, tail, (np.concatenate(kept) if kept else np.zeros(0))
    return total, tail


def adaptive_sum(
    term: Callable[[np.ndarray], np.ndarray],
    skip: int | None = None,
    policy: TruncationPolicy | None = None,
    *,
    stop: int | None = None,
    decay_exponent: float | None = None,
):
    """Sum ``term(j)`` over ``j = 1, 2, ...`` omitting ``j = skip``.

    Parameters
    ----------
    term : callable
        Vectorized map from an array of 1-based indices to term values.
    skip : int, optional
        Index left out of the sum.
    policy : TruncationPolicy, optional
        Window schedule and tolerance; defaults to ``TruncationPolicy()``.
    stop : int, optional
        Last index of a known finite support.  Reaching it ends the sum with
        ``converged=True``.
    decay_exponent : float, optional
        If the caller knows ``|term(j)|`` is eventually monotone and
        dominated by ``c * j**-p``, passing ``p`` attaches an integral tail
        bound to the report.

    Returns
    -------
    value : float or complex
    tail : TailReport

    Examples
    --------
    >>> value, tail = adaptive_sum(lambda j: 0.5 ** j)
    >>> round(value, 12), tail.converged
    (1.0, True)
    """
    return _accumulate(term, skip, policy, stop, decay_exponent=decay_exponent)


def _abs2(values: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(values):
        return values.real**2 + values.imag**2
    return values * values


def adaptive_sum_squares(
    term: Callable[[np.ndarray], np.ndarray],
    skip: int | None = None,
    policy: TruncationPolicy | None = None,
    *,
    stop: int | None = None,
    decay_exponent: float | None = None,
):
    """Sum ``|term(j)|**2``; returns the squared sum (no square root)."""
    value, tail = _accumulate(
        term, skip, policy, stop, transform=_abs2, decay_exponent=decay_exponent
    )
    return float(value), tail


def adaptive_sum_rows(
    term: Callable[[np.ndarray, np.ndarray], np.ndarray],
    rows: np.ndarray,
    skip: int | None = None,
    policy: TruncationPolicy | None = None,
    *,
    stop: int | None = None,
):
    """Row-wise :func:`adaptive_sum` of a matrix-valued term.

    ``term(r, j)`` receives a column of row labels ``r`` (shape ``(n, 1)``)
    and a row of indices ``j`` (shape ``(1, k)``) and returns an ``(n, k)``
    array.  Each row is summed over ``j`` independently with the same
    window schedule; a row stops being evaluated once it has converged.

    Returns the per-row sums and a single worst-case :class:`TailReport`.
    """
    policy = policy or TruncationPolicy()
    rows = np.asarray(rows)
    n = rows.size
    windows = list(_windows(policy, stop))
    widest = max(hi - lo + 1 for lo, hi in windows)
    chunk = max(1, MAX_BLOCK_ELEMENTS // widest)

    totals = None
    history = np.zeros((n, 0))
    converged = np.zeros(n, dtype=bool)
    deltas = np.full(n, math.inf)
    used = np.zeros(n, dtype=np.int64)
    for lo, hi in windows:
        active = np.flatnonzero(~converged)
        if active.size == 0:
            break
        idx = _indices(lo, hi, skip)
        blocks = None
        for start in range(0, active.size, chunk):
            sel = active[start : start + chunk]
            vals = np.asarray(term(rows[sel][:, None], idx[None, :]))
            if vals.shape != (sel.size, idx.size):
                vals = np.broadcast_to(vals, (sel.size, idx.size))
            part = vals.sum(axis=1)
            if blocks is None:
                blocks = np.zeros(n, dtype=np.result_type(part, float))
            blocks[sel] = part
        if totals is None:
            totals = np.zeros(n, dtype=blocks.dtype)
        elif np.iscomplexobj(blocks) and not np.iscomplexobj(totals):
            totals = totals.astype(complex)
        totals[active] += blocks[active]
        mags = np.where(~converged, np.abs(blocks), np.nan)
        history = np.column_stack([history, mags])
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.abs(blocks[active]) / np.abs(totals[active])
        rel = np.where(np.abs(totals[active]) == 0,
                       np.where(blocks[active] == 0, 0.0, math.inf), rel)
        deltas[active] = rel
        used[active] = hi
        exhausted = stop is not None and hi >= stop
        done = np.full(active.size, exhausted)
        if not exhausted and (skip is None or hi >= skip):
            done = rel <= policy.rel_tol
        if exhausted:
            deltas[active] = 0.0
        converged[active[done]] = True

    if totals is None:
        totals = np.zeros(n)
    tails = []
    for r in range(n):
        h = history[r][~np.isnan(history[r])]
        ratios = tuple(_ratio(a, b) for a, b in zip(h[-3:-1], h[-2:]))
        tails.append(
            TailReport(
                terms_used=int(used[r]),
                last_block_delta=float(deltas[r]),
                converged=bool(converged[r]),
                block_ratios=ratios,
                trend=_classify(bool(converged[r]), ratios),
            )
        )
    return totals, merge_tails(tails)


def monotone_tail_bound(term_at_M: float, decay_exponent: float, M: int) -> float:
    """Integral-comparison bound on ``sum_{j > M} a_j``.

    Valid when ``a_j`` is non-negative, eventually non-increasing and
    dominated by ``c * j**-p`` with ``a_M = c * M**-p``.
    """
    if not decay_exponent > 1:
        raise InvalidExponent(f"decay exponent must exceed 1, got {decay_exponent}")
    return term_at_M * M / (decay_exponent - 1)
