import math

import numpy as np
import pytest

from eigenderiv import TruncationPolicy, coefficient, delta_derivative, lambda_derivative, vector_norm
from eigenderiv.builtin import (
    ExampleId,
    example1_unbounded,
    example1_unboundedness_evidence,
    example2_boundedness,
    example_delta_norm,
    example_lambda_derivative,
    example_model,
    figure_data,
)

EX1_DELTA1_NORM = 0.6689297671834562
PI_SQRT12 = math.pi / math.sqrt(12)


def direct_ex2_ratio(i, terms):
    """||Delta_i|| / i for example 2 by direct summation plus the 1/(4 M) tail bound."""
    j = np.arange(1, terms + 1, dtype=float)
    j = j[j != i]
    t = j * j / (j * j - float(i) ** 2) ** 2
    return math.sqrt(math.fsum(t) + 1.0 / terms)


class TestModels:
    def test_example1(self):
        m = example_model(ExampleId.EXAMPLE_1)
        assert m.eigenvalue(3) == 3.0
        assert coefficient(m, 3, 5) == 1 / math.sqrt(8)

    def test_example2(self):
        m = example_model("paper_example_2")
        assert m.eigenvalue(4) == 0.25
        assert coefficient(m, 2, 2) == 0.25

    @pytest.mark.parametrize("which", [1, 2])
    def test_symmetric_coefficients(self, which):
        m = example_model(which)
        n = np.arange(1, 60)
        c = m.coefficients(n[:, None], n[None, :])
        np.testing.assert_array_equal(c, c.T)

    @pytest.mark.parametrize("which", [1, 2])
    def test_metadata(self, which):
        m = example_model(which)
        assert m.perturbation.monotone
        assert m.dimension is None
        assert m.field.value == "real"

    def test_parse(self):
        assert ExampleId.parse("paper_example_1") is ExampleId.EXAMPLE_1
        with pytest.raises(ValueError):
            ExampleId.parse("example_3")


class TestLambda:
    def test_values(self):
        assert example_lambda_derivative(1, 2) == 0.5
        assert example_lambda_derivative(2, 1) == 0.5
        assert example_lambda_derivative(2, 50) == 0.01

    @pytest.mark.parametrize("which", [1, 2])
    def test_bitwise_match(self, which):
        m = example_model(which)
        for i in range(1, 101):
            assert example_lambda_derivative(which, i) == lambda_derivative(m, i)


class TestDeltaNorm:
    def test_example1_first(self):
        value, tail = example_delta_norm(1, 1)
        assert tail.converged
        assert value == pytest.approx(EX1_DELTA1_NORM, rel=1e-9)

    def test_example1_oracle(self):
        # 1e6 direct terms plus the integral bound of the 1/j**3 tail.
        j = np.arange(2, 10**6 + 1, dtype=float)
        partial = math.fsum(1 / ((j - 1) ** 2 * (1 + j)))
        assert math.sqrt(partial) == pytest.approx(EX1_DELTA1_NORM, rel=1e-12)

    def test_example2_ratio_at_64(self):
        value, _ = example_delta_norm(2, 64)
        assert abs(value / 64 - 0.907) <= 0.01

    def test_example2_asymptote(self):
        value, _ = example_delta_norm(2, 512)
        oracle = direct_ex2_ratio(512, 10**7)
        assert oracle == pytest.approx(PI_SQRT12, abs=1e-3)
        assert value / 512 == pytest.approx(oracle, abs=1e-5)

    def test_small_i_ratio(self):
        value, _ = example_delta_norm(2, 1)
        assert value == pytest.approx(0.94, abs=0.01)

    @pytest.mark.parametrize("which", [1, 2])
    def test_generic_agreement(self, which):
        m = example_model(which)
        for i in range(1, 33):
            closed, _ = example_delta_norm(which, i)
            generic = vector_norm(delta_derivative(m, i).delta)
            assert closed == pytest.approx(generic, rel=1e-9)


class TestCoefficientIdentities:
    @pytest.mark.parametrize("i", [1, 3, 17])
    def test_example2(self, i):
        res = delta_derivative(example_model(2), i, TruncationPolicy(max_terms=10**4, initial_terms=10**4))
        j = np.arange(1, 10**4 + 1, dtype=float)
        expected = np.where(j == i, 0.0, i * j / np.where(j == i, 1.0, j * j - i * i))
        np.testing.assert_allclose(res.delta.values[: j.size], expected, rtol=1e-12)

    @pytest.mark.parametrize("i", [1, 4])
    def test_example1(self, i):
        res = delta_derivative(example_model(1), i, TruncationPolicy(max_terms=4096))
        j = np.arange(1, len(res.delta) + 1, dtype=float)
        mask = j != i
        expected = 1 / ((i - j[mask]) * np.sqrt(i + j[mask]))
        np.testing.assert_allclose(res.delta.values[mask], expected, rtol=1e-12)


class TestBoundedness:
    def test_bound(self):
        assert example2_boundedness(1000, 10**6) < math.pi**2 / 6

    def test_first_column(self):
        assert example2_boundedness(1, 10**6) == pytest.approx(math.sqrt(math.pi**2 / 6 - 1), abs=1e-6)

    def test_supremum_at_first_column(self):
        assert example2_boundedness(50, 10**5) == example2_boundedness(1, 10**5)

    def test_invalid(self):
        with pytest.raises(ValueError):
            example2_boundedness(0, 10)


class TestUnboundedness:
    def test_harmonic_partial(self):
        assert example1_unboundedness_evidence(1, 10) == pytest.approx(
            math.fsum(1 / k for k in range(2, 12)), rel=1e-15
        )
        assert example1_unboundedness_evidence(1, 10) == pytest.approx(2.0199, abs=1e-4)

    @pytest.mark.parametrize("k_max", [10**4, 10**5, 10**6])
    def test_log2_per_doubling(self, k_max):
        step = example1_unboundedness_evidence(1, 2 * k_max) - example1_unboundedness_evidence(1, k_max)
        assert step == pytest.approx(math.log(2), abs=0.01)

    def test_flag(self):
        tail = example1_unbounded(1)
        assert not tail.converged
        assert tail.terms_used == 2**20
        assert tail.trend == "non-decaying"


class TestFigure:
    def test_example2_ratio(self):
        rows = figure_data(2, (120, 128))
        assert all(abs(r[2] - 0.907) <= 0.01 for r in rows)

    def test_example1_decreasing_after_first(self):
        rows = figure_data(1, (1, 200), TruncationPolicy(rel_tol=1e-8))
        norms = [r[1] for r in rows]
        # i = 1 lacks the j = i - 1 neighbour term, so the sequence rises once.
        assert norms[0] < norms[1] == pytest.approx(0.7838102555541945, rel=1e-8)
        assert all(b < a for a, b in zip(norms[1:], norms[2:]))

    def test_empty_range(self):
        assert figure_data(2, (5, 4)) == []

    def test_row_shape(self):
        (row,) = figure_data(1, (1, 1))
        assert row[0] == 1 and row[1] == pytest.approx(EX1_DELTA1_NORM, rel=1e-9)
