import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eigenderiv import (
    DegenerateGap,
    IndexOutOfRange,
    PerturbedModel,
    SeriesVector,
    TruncationPolicy,
    apply_operator,
    coefficient,
    delta_derivative,
    lambda_derivative,
    residual_check,
    second_order_term,
    vector_norm,
)
from eigenderiv.builtin import example_model
from eigenderiv.modelspec import load_spec
from eigenderiv.oracle import DenseModel, fd_delta

from conftest import random_dense

# sqrt of sum_{j>=2} 1/((j-1)**2 (1+j)): 1e6-term direct sum plus integral tail bound.
EX1_DELTA1_NORM = 0.6689297671834562


def identity_model(n=6):
    return PerturbedModel.from_dense(np.arange(1.0, n + 1), np.eye(n))


def ones_model():
    return PerturbedModel.from_dense([1.0, 2.0, 4.0], np.ones((3, 3)))


class TestCoefficient:
    def test_example2_diagonal(self):
        assert coefficient(example_model(2), 1, 1) == 0.5

    def test_identity_off_diagonal(self):
        assert coefficient(identity_model(), 3, 5) == 0.0

    def test_round_trip_from_file(self, tmp_path):
        jmat = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]]
        path = tmp_path / "m.json"
        path.write_text(json.dumps({
            "field": "real",
            "model": {"type": "dense", "eigenvalues": [1, 2, 3], "coefficients": jmat},
        }))
        model = load_spec(path).to_model()
        assert coefficient(model, 2, 3) == 6.0

    @pytest.mark.parametrize("i,j", [(0, 1), (1, 7), (7, 1)])
    def test_out_of_range(self, i, j):
        with pytest.raises(IndexOutOfRange):
            coefficient(identity_model(), i, j)


class TestLambdaDerivative:
    def test_example2(self):
        assert lambda_derivative(example_model(2), 3) == 1 / 6

    def test_example1(self):
        assert lambda_derivative(example_model(1), 2) == 0.5

    @pytest.mark.parametrize("i", [1, 3, 6])
    def test_identity(self, i):
        assert lambda_derivative(identity_model(), i) == 1.0


class TestDelta:
    def test_example2_coefficient(self):
        res = delta_derivative(example_model(2), 1, TruncationPolicy(max_terms=1024))
        assert res.delta[2] == pytest.approx(2 / 3, rel=1e-15)
        assert res.delta[1] == 0.0

    def test_diagonal_perturbation(self):
        model = PerturbedModel.from_dense([1.0, 3.0, 7.0], np.diag([2.0, -1.0, 5.0]))
        for i in (1, 2, 3):
            assert not np.any(delta_derivative(model, i).delta.values)

    def test_finite_is_exhaustive(self):
        model = random_dense(3, M=9)
        res = delta_derivative(model, 4, TruncationPolicy(initial_terms=2, max_terms=2))
        lam, jmat = model.dense
        expected = np.array([0 if j == 3 else jmat[3, j] / (lam[3] - lam[j]) for j in range(9)])
        np.testing.assert_allclose(res.delta.values, expected, rtol=1e-14)
        assert res.delta.tail.converged

    def test_random_dense_matches_finite_difference(self):
        model = random_dense(11, M=5, complex_field=False)
        dense = DenseModel(*model.dense)
        exact = delta_derivative(model, 1).delta.values
        errors = [np.abs(fd_delta(dense, 1, h).values - exact).max() for h in (1e-2, 5e-3)]
        assert errors[1] < errors[0] / 3  # O(h**2)
        assert errors[1] < 1e-3

    def test_degenerate_gap(self):
        model = PerturbedModel(
            ones_model().eigensystem.__class__(lambda n: np.where(n == 5, 1.0, n.astype(float)), None),
            ones_model().perturbation.__class__(lambda i, j: 1.0 / (i + j), None),
        )
        with pytest.raises(DegenerateGap) as info:
            delta_derivative(model, 1)
        assert (info.value.i, info.value.j) == (1, 5)

    def test_dense_degenerate_rejected(self):
        with pytest.raises(DegenerateGap):
            PerturbedModel.from_dense([1.0, 2.0, 1.0], np.ones((3, 3)))

    def test_example2_nonconvergence_flagged(self):
        res = delta_derivative(example_model(2), 1)
        assert not res.converged
        assert res.delta.tail.terms_used == 2**20
        assert res.delta.tail.trend == "decaying"


class TestApplyOperator:
    def test_basis_vector_example2(self):
        out = apply_operator(example_model(2), SeriesVector.basis(1), TruncationPolicy(max_terms=512))
        m = np.arange(1, len(out) + 1)
        np.testing.assert_allclose(out.values, 1.0 / (1 + m), rtol=1e-15)

    def test_zero(self):
        out = apply_operator(random_dense(2, M=4), SeriesVector(np.zeros(4)))
        assert not np.any(out.values)

    def test_dense_matvec(self):
        model = random_dense(5, M=4, complex_field=True)
        rng = np.random.default_rng(0)
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        _, jmat = model.dense
        a = jmat.T  # column i of J is J e_i
        np.testing.assert_allclose(apply_operator(model, SeriesVector(v)).values, a @ v, rtol=1e-13)


class TestSecondOrder:
    def test_diagonal_is_zero(self):
        model = PerturbedModel.from_dense([1.0, 3.0, 7.0], np.diag([2.0, -1.0, 5.0]))
        assert not np.any(second_order_term(model, 2).values)

    def test_three_by_three(self):
        s = second_order_term(ones_model(), 1)
        assert s[1] == pytest.approx(-4 / 3, rel=1e-15)

    def test_matches_termwise_vector_sum(self):
        model = random_dense(21, M=7, complex_field=True)
        lam, jmat = model.dense
        a = jmat.T
        i = 3
        expected = np.zeros(7, dtype=complex)
        for j in range(7):
            if j == i - 1:
                continue
            c = jmat[i - 1, j] / (lam[i - 1] - lam[j])
            e = np.zeros(7)
            e[j] = 1.0
            expected += c * (a @ e - jmat[i - 1, i - 1] * e)
        np.testing.assert_allclose(second_order_term(model, i).values, expected, rtol=1e-12, atol=1e-14)

    def test_example2_coordinates(self):
        # Coordinates of S_1 in example 2 against a direct 2e6-term double loop.
        i = 1
        policy = TruncationPolicy(nested_max_terms=2**14)
        s = second_order_term(example_model(2), i, policy, out_terms=64)
        k = np.arange(2, 2 * 10**6 + 1, dtype=float)
        c = (1 / (1 + k)) / (1 - 1 / k)
        for m in (1, 2, 10, 64):
            direct = math.fsum(c / (k + m)) - (0.5 * c[m - 2] if m != 1 else 0.0)
            assert s[m] == pytest.approx(direct, abs=2e-4)

    def test_example1_norm_diverges(self):
        # Each coordinate converges, but m**0.5 * S_1[m] tends to sum_k c_k != 0,
        # so the partial norms grow like log(m).
        k = np.arange(2, 10**7 + 1, dtype=float)
        c = 1.0 / ((1 - k) * np.sqrt(1 + k))
        limit = math.fsum(c)
        assert limit == pytest.approx(-1.96, abs=0.01)

        s = second_order_term(example_model(1), 1, TruncationPolicy(nested_max_terms=2**13))
        assert s.tail.trend == "non-decaying"
        assert s.tail.inner.trend in ("converged", "decaying")
        for m in (100, 1000):
            direct = math.fsum(c / np.sqrt(k + m)) - c[m - 2] / math.sqrt(2)
            assert s[m] == pytest.approx(direct, abs=5e-4)
        assert math.sqrt(1000) * s[1000] == pytest.approx(limit, rel=0.05)


class TestResidual:
    def test_dense_exact(self):
        model = random_dense(8, M=10)
        for h in (1e-3, 0.1, 1.0):
            rep = residual_check(model, 2, h)
            assert rep.defect <= 1e-10 * rep.exactness_scale

    def test_zero_step(self):
        rep = residual_check(random_dense(9, M=6, complex_field=True), 4, 0.0)
        assert rep.defect == 0.0

    def test_example2_truncated(self):
        policy = TruncationPolicy(max_terms=10**4, nested_max_terms=10**4)
        rep = residual_check(example_model(2), 1, 1e-2, policy)
        assert rep.defect < 1e-6 * rep.exactness_scale
        assert rep.second_order_norm > 0


class TestNorm:
    def test_unit_vector(self):
        assert vector_norm(SeriesVector.basis(5)) == 1.0

    def test_pythagoras(self):
        assert vector_norm(SeriesVector.from_mapping({1: 3.0, 2: 4.0})) == 5.0

    def test_example1_delta(self):
        res = delta_derivative(example_model(1), 1)
        assert res.converged
        assert vector_norm(res.delta) == pytest.approx(EX1_DELTA1_NORM, rel=1e-9)


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, h=st.sampled_from([0.0, 1e-3, 1e-1, 1.0, 0.1j]))
def test_residual_identity_exact(seed, h):
    model = random_dense(seed)
    if isinstance(h, complex) and model.field.value == "real":
        h = 0.1
    i = 1 + seed % model.dimension
    rep = residual_check(model, i, h)
    assert rep.defect <= 1e-10 * rep.exactness_scale


@settings(max_examples=40, deadline=None)
@given(seed=seeds)
def test_delta_vanishes_at_own_index(seed):
    model = random_dense(seed)
    for i in range(1, model.dimension + 1):
        assert delta_derivative(model, i).delta[i] == 0.0


@settings(max_examples=40, deadline=None)
@given(seed=seeds, a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_linearity_in_perturbation(seed, a, b):
    m1 = random_dense(seed, complex_field=False)
    lam, j1 = m1.dense
    j2 = np.random.default_rng(seed + 1).normal(size=j1.shape)
    m2 = PerturbedModel.from_dense(lam, j2)
    mix = PerturbedModel.from_dense(lam, a * j1 + b * j2)
    for i in range(1, lam.size + 1):
        d1, d2, dm = (delta_derivative(m, i) for m in (m1, m2, mix))
        expected = a * d1.delta.values + b * d2.delta.values
        scale = abs(a) * np.abs(d1.delta.values) + abs(b) * np.abs(d2.delta.values) + 1e-300
        assert np.all(np.abs(dm.delta.values - expected) <= 1e-12 * scale.max() + 1e-12 * scale)
        lam_scale = abs(a * d1.lambda_derivative) + abs(b * d2.lambda_derivative)
        assert abs(dm.lambda_derivative - (a * d1.lambda_derivative + b * d2.lambda_derivative)) <= 1e-12 * lam_scale + 1e-300


@settings(max_examples=40, deadline=None)
@given(seed=seeds, c=st.floats(-10, 10).filter(lambda x: abs(x) > 1e-3))
def test_scaling_covariance(seed, c):
    model = random_dense(seed)
    lam, jmat = model.dense
    scaled = PerturbedModel.from_dense(lam, c * jmat, field=model.field)
    for i in range(1, lam.size + 1):
        d, ds = delta_derivative(model, i), delta_derivative(scaled, i)
        np.testing.assert_allclose(ds.delta.values, c * d.delta.values, rtol=1e-13, atol=0)
        assert ds.lambda_derivative == pytest.approx(c * d.lambda_derivative, rel=1e-13)


@settings(max_examples=30, deadline=None)
@given(seed=seeds, h=st.sampled_from([0.0, 1e-3, 0.5, 2.0]))
def test_diagonal_perturbation_is_exact(seed, h):
    rng = np.random.default_rng(seed)
    model = random_dense(seed)
    lam, _ = model.dense
    diag = np.diag(rng.normal(size=lam.size))
    dmodel = PerturbedModel.from_dense(lam, diag, field=model.field)
    i = 1 + seed % lam.size
    assert not np.any(delta_derivative(dmodel, i).delta.values)
    rep = residual_check(dmodel, i, h)
    assert rep.defect <= 1e-12 * rep.exactness_scale


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_conjugation_consistency(seed):
    model = random_dense(seed, complex_field=True)
    lam, jmat = model.dense
    conj = PerturbedModel.from_dense(lam.conj(), jmat.conj())
    for i in range(1, lam.size + 1):
        d, dc = delta_derivative(model, i), delta_derivative(conj, i)
        np.testing.assert_allclose(dc.delta.values, d.delta.values.conj(), rtol=1e-14)
        assert dc.lambda_derivative == np.conj(d.lambda_derivative)
