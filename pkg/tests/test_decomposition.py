import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mincer_decomp.decomposition import (DecompositionResult, closed_form_simple, compute_moments,
                                         case_formulas, decompose, inequality_level,
                                         inequality_terms, scalar_moments, shift_derivatives)
from mincer_decomp.errors import DataError
from mincer_decomp.model_frame import DesignMatrix, ObservationTable, build_design
from mincer_decomp.validation import derivative_oracle

from conftest import random_design, random_psd


def test_moments_three_points(h012):
    m = compute_moments(h012)
    np.testing.assert_allclose(m.E, [1, 1, 5 / 3])
    assert m.V[1, 1] == pytest.approx(2 / 3)
    assert m.V[1, 2] == pytest.approx(4 / 3)
    assert m.V[2, 2] == pytest.approx(26 / 9)
    np.testing.assert_array_equal(m.V[0], 0)
    np.testing.assert_array_equal(m.V[:, 0], 0)


def test_derivatives_three_points(h012):
    m = compute_moments(h012)
    np.testing.assert_allclose(m.dE, [0, 1, 2])
    expected = np.zeros((3, 3))
    expected[1, 2] = expected[2, 1] = 4 / 3
    expected[2, 2] = 16 / 3
    np.testing.assert_allclose(m.dV, expected, atol=1e-14)


def test_derivatives_match_shifted_moments(h012):
    eps = 1e-5
    from mincer_decomp.model_frame import shift_education

    up = compute_moments(shift_education(h012, eps))
    dn = compute_moments(shift_education(h012, -eps))
    m = compute_moments(h012)
    np.testing.assert_allclose((up.V - dn.V) / (2 * eps), m.dV, atol=1e-6)
    np.testing.assert_allclose((up.E - dn.E) / (2 * eps), m.dE, atol=1e-6)


def test_population_identities():
    rng = np.random.default_rng(0)
    d = random_design(rng, 300, 5)
    m = compute_moments(d)
    E = [np.mean(d.education ** k) for k in range(5)]
    for j in range(1, 3):
        for k in range(1, 3):
            assert m.V[j, k] == pytest.approx(E[j + k] - E[j] * E[k], rel=1e-10)


def test_control_blocks_of_dv_are_zero():
    rng = np.random.default_rng(1)
    d = random_design(rng, 200, 5)
    m = compute_moments(d)
    np.testing.assert_array_equal(m.dV[0], 0)
    np.testing.assert_array_equal(m.dV[:, 0], 0)
    np.testing.assert_array_equal(m.dV[3:, 3:], 0)
    np.testing.assert_array_equal(m.dV[1, 3:], 0)
    np.testing.assert_allclose(m.dV[2, 3:], 2 * m.V[1, 3:])
    np.testing.assert_allclose(m.dV, m.dV.T)


def test_sample_convention_and_guards(h012):
    pop, samp = compute_moments(h012), compute_moments(h012, "sample")
    np.testing.assert_allclose(samp.V, pop.V * 3 / 2)
    with pytest.raises(DataError):
        compute_moments(h012, "weird")
    one = DesignMatrix([1.0], [[1.0, 2.0, 4.0]])
    with pytest.raises(DataError):
        compute_moments(one, "sample")


def test_level_examples(h012):
    m = compute_moments(h012)
    assert inequality_level([0, 1, 0], np.zeros((3, 3)), m) == pytest.approx(2 / 3)
    om = np.zeros((3, 3))
    om[0, 0] = 0.7
    assert inequality_level(np.zeros(3), om, m) == pytest.approx(0.7)
    assert inequality_terms(np.zeros(3), om, m) == pytest.approx((0.0, 0.0, 0.7))


def test_decompose_examples(h012):
    m = compute_moments(h012)
    r = decompose([0, 0, 1], np.zeros((3, 3)), m)
    assert r.ef_between == pytest.approx(16 / 3) and r.ef_within == 0
    r = decompose([1, 0.5, 0], np.diag([0.0, 1.0, 1.0]), m)
    assert r.ef_within == pytest.approx(14.0) and r.ef_between == 0
    om = np.zeros((3, 3))
    om[0, 0] = 2.0
    r = decompose([1, 0.5, 0], om, m)
    assert (r.ef_between, r.ef_within, r.total) == (0, 0, 0)
    assert r.share_between is None and r.share_within is None


def test_decompose_dimension_mismatch(h012):
    with pytest.raises(DataError):
        decompose([0, 1], np.zeros((3, 3)), compute_moments(h012))


def test_closed_form_examples(h012):
    sm = scalar_moments(h012)
    assert closed_form_simple([0, 0, 1], np.zeros((3, 3)), sm)[0] == pytest.approx(16 / 3)
    assert closed_form_simple([0, 1, 0], np.diag([0, 1.0, 1.0]), sm)[1] == pytest.approx(14.0)
    assert closed_form_simple(np.zeros(3), np.zeros((3, 3)), (0, 0, 0, 0, 0)) == (0.0, 0.0)
    with pytest.raises(DataError):
        closed_form_simple(np.zeros(4), np.zeros((4, 4)), sm)


def test_case_formulas():
    assert case_formulas(1) == (0.0, 0.0)
    assert case_formulas(2, beta2=1.0, V12=4 / 3) == pytest.approx((16 / 3, 0.0))
    assert case_formulas(3, omega11=1.0, omega22=1.0, E1=1.0, E3=3.0) == pytest.approx((0, 14.0))
    with pytest.raises(DataError):
        case_formulas(2, beta2=1.0, V12=1.0, beta1=0.3)
    with pytest.raises(DataError):
        case_formulas(3, omega11=1, omega22=1, E1=1, E3=3, omega12=0.1)
    with pytest.raises(DataError):
        case_formulas(1, beta2=0.5)
    with pytest.raises(DataError):
        case_formulas(2, beta2=1.0)
    with pytest.raises(DataError):
        case_formulas(4)


def test_case_formulas_agree_with_matrix_form(h012):
    m = compute_moments(h012)
    E1, E2, E3, V11, V12 = scalar_moments(h012)
    b2 = 0.7
    assert decompose([0.2, 0, b2], np.zeros((3, 3)), m).ef_between == pytest.approx(
        case_formulas(2, beta2=b2, V12=V12)[0])
    om = np.diag([0.3, 0.4, 0.05])
    assert decompose([0.2, 0.1, 0], om, m).ef_within == pytest.approx(
        case_formulas(3, omega11=0.4, omega22=0.05, E1=E1, E3=E3)[1])


def test_shares_sign_convention(h012):
    m = compute_moments(h012)
    r = decompose([0, 0, -1], np.diag([0, 0.1, 0]), m)
    assert r.total == r.ef_between + r.ef_within
    assert r.share_between + r.share_within == pytest.approx(1.0)
    assert isinstance(r, DecompositionResult) and set(r.as_dict()) >= {"between", "within"}


def test_uncorrelated_control_is_inert():
    h = np.repeat(np.arange(6.0), 4)
    z = np.tile([1.0, -1.0, 2.0, -2.0], 6)
    base = build_design(ObservationTable(h, h, np.empty((24, 0))))
    ext = build_design(ObservationTable(h, h, z[:, None]))
    mb, me = compute_moments(base), compute_moments(ext)
    assert abs(me.V[1, 3]) < 1e-14 and abs(me.V[2, 3]) < 1e-14
    beta = np.array([0.5, 0.1, 0.02])
    assert decompose(np.append(beta, 0.3), np.zeros((4, 4)), me).ef_between == pytest.approx(
        decompose(beta, np.zeros((3, 3)), mb).ef_between, rel=1e-12)
    rng = np.random.default_rng(3)
    om3 = random_psd(rng, 3)
    om4 = np.zeros((4, 4))
    om4[:3, :3] = om3
    w3 = decompose(beta, om3, mb).ef_within
    assert decompose(np.append(beta, 0.3), om4, me).ef_within == pytest.approx(w3, rel=1e-12)
    om4[0, 3] = om4[3, 0] = 0.05
    assert decompose(np.append(beta, 0.3), om4, me).ef_within == pytest.approx(
        w3 + 2 * 0.05 * me.E[3], rel=1e-10)


def test_translation_of_education():
    rng = np.random.default_rng(7)
    h = rng.uniform(0, 10, 100)
    a = compute_moments(build_design(ObservationTable(h, h, np.empty((100, 0)))))
    b = compute_moments(build_design(ObservationTable(h, h + 3.0, np.empty((100, 0)))))
    np.testing.assert_allclose(a.dE[:2], b.dE[:2])
    assert b.dE[2] == pytest.approx(a.dE[2] + 6.0)
    np.testing.assert_allclose(b.dE, shift_derivatives(b.E, b.V)[0])
    np.testing.assert_allclose(b.dV, shift_derivatives(b.E, b.V)[1])


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 31), p=st.sampled_from([3, 4, 5]))
def test_total_matches_finite_difference(seed, p):
    rng = np.random.default_rng(seed)
    d = random_design(rng, 200, p)
    beta, om = rng.normal(size=p) * 0.1, random_psd(rng, p, 0.1)
    total = decompose(beta, om, compute_moments(d)).total
    fd = derivative_oracle(d, beta, om, 1e-4)
    assert total == pytest.approx(fd, rel=1e-5, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_closed_form_equals_matrix_form(seed):
    rng = np.random.default_rng(seed)
    d = random_design(rng, 50, 3)
    beta, om = rng.normal(size=3), random_psd(rng, 3)
    r = decompose(beta, om, compute_moments(d))
    b, w = closed_form_simple(beta, om, scalar_moments(d))
    assert b == pytest.approx(r.ef_between, rel=1e-10, abs=1e-10)
    assert w == pytest.approx(r.ef_within, rel=1e-10, abs=1e-10)
