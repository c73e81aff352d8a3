import numpy as np
import pytest

from eigenderiv import PerturbedModel

_ACCEPTANCE = []


def random_eigenvalues(rng, M, complex_field=False, min_gap=0.1):
    lam = np.cumsum(min_gap + rng.uniform(0.0, 1.0, M)) - M / 2
    rng.shuffle(lam)
    if complex_field:
        lam = lam + 1j * rng.uniform(-1.0, 1.0, M)
    return lam


def random_dense(seed, M=None, complex_field=None, symmetric=False, min_gap=0.1, normalized=False):
    """Random dense model with pairwise eigenvalue gaps >= min_gap.

    ``normalized`` scales the Gaussian coefficients by ``1/sqrt(M)`` so ``||J||`` stays O(1).
    """
    rng = np.random.default_rng(seed)
    if M is None:
        M = int(rng.integers(2, 17))
    if complex_field is None:
        complex_field = bool(rng.integers(0, 2))
    lam = random_eigenvalues(rng, M, complex_field, min_gap)
    jmat = rng.normal(size=(M, M))
    if complex_field:
        jmat = jmat + 1j * rng.normal(size=(M, M))
    if symmetric:
        jmat = (jmat + jmat.T) / 2
    if normalized:
        jmat = jmat / np.sqrt(M)
    return PerturbedModel.from_dense(lam, jmat, field="complex" if complex_field else "real")


@pytest.fixture
def acceptance():
    def record(criterion, passed, detail=""):
        _ACCEPTANCE.append((criterion, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(
            f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        )
