import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracle_cases import oracle_value, random_tuple, reversed_tuples
from stochcert.bounds import (Certificate, CertificateParamError, CertKind, evaluate_bound,
                              lower_bound_ra, lower_bound_safety, recursion_oracle,
                              reversed_sign_bounds, upper_bound_ra_kushner, upper_bound_ra_t3,
                              upper_bound_safety_kushner, upper_bound_safety_t1,
                              validate_certificate_params)
from stochcert.polynomial import parse_polynomial


# -- parameter validation ------------------------------------------------------

def test_tag_for_plain_t1():
    assert validate_certificate_params(CertKind.SAFETY_UPPER_T1, 1.0, 0.0) == "α=1, γ=0∈[0,1]"


def test_ra_lower_rejects_alpha_one():
    with pytest.raises(CertificateParamError, match="α cannot equal 1"):
        validate_certificate_params(CertKind.RA_LOWER, 1.0, 0.5, 1.0)


def test_safety_lower_alpha_one_needs_positive_beta():
    with pytest.raises(CertificateParamError, match="β>0 required when α=1"):
        validate_certificate_params(CertKind.SAFETY_LOWER, 1.0, 0.0, 1.0)


@pytest.mark.parametrize("kind,alpha,beta", [
    (CertKind.SAFETY_UPPER_T1, 1.1, 0.0),
    (CertKind.SAFETY_UPPER_T1, 0.9, 1.2),
    (CertKind.SAFETY_UPPER_KUSHNER, 0.9, 0.1),
    (CertKind.SAFETY_UPPER_KUSHNER, 1.1, -0.1),
    (CertKind.RA_UPPER_T3, 1.0, -0.01),
    (CertKind.RA_UPPER_KUSHNER, 1.5, 1.01),
    (CertKind.SAFETY_LOWER, 1.1, -0.2),
    (CertKind.RA_LOWER, 0.9, 0.5),
    (CertKind.SAFETY_UPPER_T1, float("nan"), 0.0),
])
def test_out_of_range_parameters(kind, alpha, beta):
    M = 1.0 if kind.is_lower else None
    with pytest.raises(CertificateParamError):
        validate_certificate_params(kind, alpha, beta, M)


def test_certificate_needs_m_exactly_for_lower_kinds():
    v = parse_polynomial("x^2", ["x"])
    with pytest.raises(CertificateParamError):
        Certificate(v, CertKind.SAFETY_LOWER, 1.1, 0.0)
    with pytest.raises(CertificateParamError):
        Certificate(v, CertKind.SAFETY_UPPER_T1, 1.0, 0.0, M=2.0)
    c = Certificate(v, CertKind.RA_LOWER, 1.06, 0.0, M=2.25)
    assert Certificate.from_json(c.to_json()) == c


# -- closed forms --------------------------------------------------------------

def test_t1_examples():
    assert upper_bound_safety_t1(0.5, 1, 0, 30).raw_value == 0.5
    assert upper_bound_safety_t1(0.04, 1, 1 / 300, 30).raw_value == pytest.approx(0.14, abs=1e-12)
    assert upper_bound_safety_t1(0.03, 1 / 1.1, 0.001, 30).raw_value == pytest.approx(0.687976,
                                                                                     abs=1e-6)
    r = upper_bound_safety_t1(0.5, 1, -0.1, 2)
    assert r.raw_value == pytest.approx(0.395, abs=1e-12)
    assert "<0" in r.case_tag


def test_t1_rejects_negative_v0():
    with pytest.raises(CertificateParamError):
        upper_bound_safety_t1(-0.1, 1, 0, 3)


def test_kushner_safety_examples():
    assert upper_bound_safety_kushner(0.5, 2, 0, 10).raw_value == 0.5
    assert upper_bound_safety_kushner(0.2, 2, 0.6, 1).raw_value == pytest.approx(0.7, abs=1e-12)
    assert upper_bound_safety_kushner(0.5, 1, 0.01, 10).raw_value == pytest.approx(0.6, abs=1e-12)
    with pytest.raises(CertificateParamError):
        upper_bound_safety_kushner(1.0, 2, 0.1, 3)


def test_safety_lower_examples():
    r = lower_bound_safety(0.7, 0.7, 1, 0.1, 13)
    assert r.raw_value == pytest.approx(1.0, abs=1e-12)
    assert "probability one" in r.note
    assert lower_bound_safety(0, 1, 1, 0.1, 9).raw_value == pytest.approx(0.0, abs=1e-12)
    assert lower_bound_safety(0.5, 1, 1.1, 0, 50).raw_value == pytest.approx(0.4961, abs=1e-4)
    with pytest.raises(CertificateParamError):
        lower_bound_safety(1.5, 1.0, 1.1, 0.0, 5)


def test_ra_t3_examples():
    assert upper_bound_ra_t3(0.3, 1, 0, 30).raw_value == 0.3
    assert upper_bound_ra_t3(0.1, 1, 0.01, 30).raw_value == pytest.approx(0.4, abs=1e-12)
    r = upper_bound_ra_t3(0.05, 1 / 1.1, 0.001, 30)
    assert r.raw_value == pytest.approx(1.0370, abs=1e-4)
    assert r.clamped_value == 1.0


def test_ra_kushner_examples():
    assert upper_bound_ra_kushner(0, 2, 0, 5).raw_value == 0
    assert upper_bound_ra_kushner(0.1, 2, 0.8, 1).raw_value == pytest.approx(0.85, abs=1e-12)
    assert upper_bound_ra_kushner(0, 2, 0.3, 1).raw_value == pytest.approx(0.3, abs=1e-12)


def test_ra_lower_examples():
    assert lower_bound_ra(1, 1, 1.06, 0, 17).raw_value == pytest.approx(1.0, abs=1e-12)
    assert 1.06 ** 51 == pytest.approx(19.52, abs=0.01)
    r = lower_bound_ra(0, 1, 1.06, 0, 50)
    assert r.raw_value == pytest.approx(-0.054, abs=1e-3)
    assert r.clamped_value == 0.0
    assert lower_bound_ra(0.5, 1, 1.06, 0, 50).raw_value == pytest.approx(0.4730, abs=1e-4)


def test_case_boundaries_join_documented_branch():
    # γ = 0 exactly (β = (α-1)/α) belongs to the γ∈[0,1] branch for T1
    alpha = 0.8
    r = upper_bound_safety_t1(0.3, alpha, (alpha - 1) / alpha, 4)
    assert "∈[0,1]" in r.case_tag
    # ratio βα/(α-1) = 1 belongs to the power branch for the RA Kushner form
    r = upper_bound_ra_kushner(0.3, 2.0, 0.5, 4)
    assert "≤1" in r.case_tag
    assert r.raw_value == pytest.approx(1 - 0.7 * 0.5 ** 4, abs=1e-12)


def test_clamping_rule():
    rng = np.random.default_rng(7)
    for kind in CertKind:
        for _ in range(50):
            t = random_tuple(kind, rng)
            r = evaluate_bound(kind, **t)
            assert r.clamped_value == min(1.0, max(0.0, r.raw_value))


def test_report_json_fields():
    r = lower_bound_ra(0.5, 1, 1.06, 0, 50)
    assert set(r.to_json()) == {"kind", "case_tag", "gamma", "raw", "clamped", "v0", "alpha",
                                "beta", "M", "N"}


# -- recursion oracle ------------------------------------------------------------

def test_recursion_examples():
    assert recursion_oracle(0.03, None, 1 / 1.1, 0.001, 30) == pytest.approx(
        upper_bound_safety_t1(0.03, 1 / 1.1, 0.001, 30).raw_value, rel=1e-9)
    assert recursion_oracle(0.37, None, 1.0, 0.0, 25) == 0.37
    assert recursion_oracle(1.0, 1.0, 1.1, 0.0, 12, direction="lower") == pytest.approx(1.0)


@pytest.mark.parametrize("kind", list(CertKind))
def test_closed_form_matches_recursion(kind):
    rng = np.random.default_rng(hash(kind.value) % 2 ** 32)
    for _ in range(1000):
        t = random_tuple(kind, rng)
        closed = evaluate_bound(kind, **t).raw_value
        assert abs(closed - oracle_value(kind, t)) <= 1e-9 * max(1.0, abs(closed)), t


@pytest.mark.parametrize("kind", list(CertKind))
def test_zero_horizon(kind):
    rng = np.random.default_rng(3)
    for _ in range(100):
        t = random_tuple(kind, rng)
        t["N"] = 0
        r = evaluate_bound(kind, **t)
        if not kind.is_lower:
            if "<0" not in r.case_tag and "≤0" not in r.case_tag:
                assert r.raw_value == pytest.approx(t["v0"], abs=1e-12)
            continue
        a, b, v0, M = t["alpha"], t["beta"], t["v0"], t["M"]
        if a > 1:
            want = ((a * v0 - M) * (a - 1) + b * (a - 1)) / ((a + b - 1) * (a - 1))
            assert r.raw_value == pytest.approx(want, rel=1e-9, abs=1e-12)
        assert r.raw_value == pytest.approx(oracle_value(kind, t), rel=1e-9, abs=1e-12)


# -- monotonicity and the reversed-sign property ------------------------------

@settings(max_examples=200, deadline=None)
@given(v0=st.floats(0, 1), beta=st.floats(0, 1), N=st.integers(0, 200))
def test_t1_alpha_one_nondecreasing_in_horizon(v0, beta, N):
    assert (upper_bound_safety_t1(v0, 1.0, beta, N + 1).raw_value
            >= upper_bound_safety_t1(v0, 1.0, beta, N).raw_value)


@settings(max_examples=200, deadline=None)
@given(M=st.floats(0, 2), frac=st.floats(0, 1), beta=st.floats(1e-3, 1), N=st.integers(0, 200))
def test_lower_alpha_one_nondecreasing_in_horizon(M, frac, beta, N):
    v0 = M * frac
    assert (lower_bound_safety(v0, M, 1.0, beta, N + 1).raw_value
            >= lower_bound_safety(v0, M, 1.0, beta, N).raw_value - 1e-15)


def test_reversed_sign_bounds_never_positive():
    rng = np.random.default_rng(8)
    for v0, alpha, beta, N in reversed_tuples(rng, 1000):
        r = reversed_sign_bounds(v0, alpha, beta, N)
        assert r.raw_value <= 1e-12, (v0, alpha, beta, N, r.case_tag)
        assert r.clamped_value == 0.0


def test_reversed_sign_examples():
    assert reversed_sign_bounds(0, 1, -0.1, 5).raw_value == pytest.approx(-0.5)
    assert reversed_sign_bounds(-0.2, 0.9, -0.2, 3).raw_value < 0
    assert reversed_sign_bounds(0, 1, 0, 9).raw_value == pytest.approx(0.0, abs=1e-15)
