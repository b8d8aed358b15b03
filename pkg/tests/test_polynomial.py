import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochcert.polynomial import (Box, Polynomial, PolynomialSyntaxError, bernstein_form,
                                  compose, evaluate, interval_enclosure, monomials_up_to,
                                  naive_interval_enclosure, parse_polynomial)

XT = ("x", "t")


def random_poly(rng, variables, degree=4, n_terms=6):
    exps = monomials_up_to(variables, degree)
    picks = rng.choice(len(exps), size=min(n_terms, len(exps)), replace=False)
    return Polynomial({exps[i]: float(rng.normal()) for i in picks}, variables)


# -- parsing ------------------------------------------------------------------

def test_parse_safe_set_polynomial():
    p = parse_polynomial("x^2 - 1", ["x"])
    assert dict(p.terms) == {(2,): 1.0, (0,): -1.0}


def test_parse_zero_has_no_terms():
    p = parse_polynomial("0", ["x"])
    assert dict(p.terms) == {}
    assert p.is_zero()


def test_parse_binomial_square():
    p = parse_polynomial("(x + t)*(x + t)", XT)
    assert p == Polynomial({(2, 0): 1.0, (1, 1): 2.0, (0, 2): 1.0}, XT)


@pytest.mark.parametrize("text", ["x^2 - 1", "(x - 0.9)^2 - 1e-4", "-(x+t)^3/4 + 2.5*x*t",
                                  "3", "x*x*t - t^2 + 0.125"])
def test_print_parse_fixed_point(text):
    p = parse_polynomial(text, XT)
    q = parse_polynomial(str(p), XT)
    assert q == p
    assert parse_polynomial(str(q), XT) == q


def test_parse_rational_literal_and_scientific():
    p = parse_polynomial("1/300 + 2e-3*x", ["x"])
    assert p.almost_equal(Polynomial({(0,): 1 / 300, (1,): 0.002}, ["x"]), 1e-15)


@pytest.mark.parametrize("text,pos", [("x^2 -", 5), ("x + * 2", 4), ("(x + 1", 6), ("x^-1", 2)])
def test_syntax_errors_carry_position(text, pos):
    with pytest.raises(PolynomialSyntaxError) as info:
        parse_polynomial(text, ["x"])
    assert info.value.position == pos


def test_undeclared_variable_rejected():
    with pytest.raises(PolynomialSyntaxError, match="y"):
        parse_polynomial("x + y", ["x"])


# -- evaluation and composition ----------------------------------------------

def test_evaluate_examples():
    assert evaluate(parse_polynomial("x^2 - 1", ["x"]), {"x": 0.2}) == pytest.approx(-0.96)
    sq = parse_polynomial("x^2 + 2*x*t + t^2", XT)
    assert evaluate(sq, {"x": 1, "t": -1}) == 0.0
    assert evaluate(parse_polynomial("x^2 - 2", ["x"]), {"x": 1.5}) == pytest.approx(0.25)


def test_evaluate_missing_variable():
    with pytest.raises(KeyError):
        evaluate(parse_polynomial("x + t", XT), {"x": 1.0})


def test_compose_binomial():
    p = parse_polynomial("x^2", XT)
    out = compose(p, {"x": parse_polynomial("x + t", XT)})
    assert out == parse_polynomial("x^2 + 2*x*t + t^2", XT)


def test_compose_contraction_dynamics():
    p = parse_polynomial("x^2", XT)
    out = compose(p, {"x": parse_polynomial("(-0.5 + t)*x", XT)})
    expected = parse_polynomial("(0.25 - t + t^2)*x^2", XT)
    rng = np.random.default_rng(3)
    for x, t in rng.uniform(-2, 2, size=(10, 2)):
        assert out.evaluate({"x": x, "t": t}) == pytest.approx(expected.evaluate({"x": x, "t": t}),
                                                                rel=1e-12, abs=1e-12)


def test_compose_constant_is_unchanged():
    c = Polynomial.constant(2.5, ["x"])
    assert compose(c, {"x": parse_polynomial("x^3 + 1", ["x"])}) == c


def test_compose_missing_entry():
    with pytest.raises(KeyError):
        compose(parse_polynomial("x*t", XT), {"x": parse_polynomial("x", XT)})


def test_compose_evaluate_commute():
    rng = np.random.default_rng(11)
    for _ in range(50):
        p = random_poly(rng, XT, 3)
        sub = {"x": random_poly(rng, XT, 2), "t": random_poly(rng, XT, 2)}
        comp = compose(p, sub)
        for a in rng.uniform(-1.5, 1.5, size=(5, 2)):
            point = dict(zip(XT, a))
            inner = {v: sub[v].evaluate(point) for v in XT}
            want = p.evaluate(inner)
            assert comp.evaluate(point) == pytest.approx(want, rel=1e-9, abs=1e-9)


# -- algebra --------------------------------------------------------------------

def test_normalization_drops_zero_terms():
    p = Polynomial({(1,): 1.0, (0,): 1e-17}, ["x"])
    assert dict(p.terms) == {(1,): 1.0}
    assert (p - p).is_zero()


def test_randomized_distributivity():
    rng = np.random.default_rng(0)
    names = ("x", "y", "z")
    for _ in range(500):
        k = int(rng.integers(1, 4))
        vs = names[:k]
        p, q, r = (random_poly(rng, vs, 4) for _ in range(3))
        lhs = (p + q) * r
        rhs = p * r + q * r
        assert lhs.almost_equal(rhs, 1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_commutativity(a, b):
    p = Polynomial({(0,): a[0], (1,): a[1], (2,): a[2]}, ["x"])
    q = Polynomial({(0,): b[0], (1,): b[1], (3,): b[2]}, ["x"])
    assert (p + q).almost_equal(q + p, 1e-12)
    assert (p * q).almost_equal(q * p, 1e-9)


def test_power_matches_repeated_product():
    p = parse_polynomial("x - 2*t + 0.5", XT)
    assert (p ** 3).almost_equal(p * p * p, 1e-12)
    assert p ** 0 == Polynomial.constant(1.0, XT)


def test_json_round_trip():
    p = parse_polynomial("x^2 - 3.25*x*t + 1e-3", XT)
    assert Polynomial.from_json(p.to_json()) == p


# -- Bernstein and interval enclosures -----------------------------------------

def test_bernstein_identity_on_unit_interval():
    bf = bernstein_form(Polynomial.variable("x", ["x"]), Box(("x",), (0.0,), (1.0,)), (1,))
    np.testing.assert_allclose(bf.coefficients, [0.0, 1.0], atol=1e-15)


def test_bernstein_square_on_symmetric_box():
    r = math.sqrt(2)
    bf = bernstein_form(parse_polynomial("x^2", ["x"]), Box(("x",), (-r,), (r,)), (2,))
    np.testing.assert_allclose(bf.coefficients, [2.0, -2.0, 2.0], rtol=1e-12)


def test_bernstein_constant():
    box = Box(XT, (-3.0, 0.5), (1.0, 2.0))
    bf = bernstein_form(Polynomial.constant(1.0, XT), box, (3, 2))
    np.testing.assert_allclose(bf.coefficients, 1.0)


def test_bernstein_degree_too_low():
    with pytest.raises(ValueError):
        bernstein_form(parse_polynomial("x^3", ["x"]), Box(("x",), (0.0,), (1.0,)), (2,))


def random_box(rng, variables):
    lo = rng.uniform(-2, 1, size=len(variables))
    hi = lo + rng.uniform(0.05, 2, size=len(variables))
    return Box(tuple(variables), tuple(lo), tuple(hi))


def test_bernstein_range_enclosure_soundness():
    rng = np.random.default_rng(1)
    for i in range(200):
        vs = XT if i % 2 else ("x",)
        p = random_poly(rng, vs, 4)
        box = random_box(rng, vs)
        bf = bernstein_form(p, box)
        pts = box.sample(rng, 1000)
        vals = p.evaluate_many(pts)
        assert vals.min() >= bf.min() - 1e-9
        assert vals.max() <= bf.max() + 1e-9


def test_bernstein_evaluation_agrees_with_power_form():
    rng = np.random.default_rng(2)
    for _ in range(50):
        p = random_poly(rng, XT, 4)
        box = random_box(rng, XT)
        bf = bernstein_form(p, box)
        for pt in box.sample(rng, 5):
            want = p.evaluate(pt)
            assert bf.evaluate(pt) == pytest.approx(want, rel=1e-9, abs=1e-9)


def test_degree_elevation_tightens_but_stays_sound():
    rng = np.random.default_rng(4)
    for _ in range(30):
        p = random_poly(rng, ("x",), 4)
        box = random_box(rng, ("x",))
        vals = p.evaluate_many(np.linspace(box.lo[0], box.hi[0], 2001)[:, None])
        prev = bernstein_form(p, box, (4,))
        for d in (6, 10, 16):
            bf = bernstein_form(p, box, (d,))
            assert bf.min() >= prev.min() - 1e-12
            assert bf.min() <= vals.min() + 1e-9
            assert bf.max() >= vals.max() - 1e-9
            prev = bf


def test_interval_enclosure_examples():
    lo, hi = interval_enclosure(parse_polynomial("x^2", ["x"]), Box(("x",), (-1.0,), (1.0,)))
    assert lo <= 0.0 and hi >= 1.0
    lo, hi = interval_enclosure(parse_polynomial("x + t", XT), Box(XT, (-1.0, -0.1), (1.0, 0.1)))
    assert lo == pytest.approx(-1.1) and hi == pytest.approx(1.1)
    assert interval_enclosure(Polynomial.constant(3.0, XT), Box(XT, (0, 0), (1, 1))) == (3.0, 3.0)


def test_interval_enclosure_is_tighter_of_both():
    rng = np.random.default_rng(5)
    for _ in range(100):
        p = random_poly(rng, XT, 3)
        box = random_box(rng, XT)
        lo, hi = interval_enclosure(p, box)
        nlo, nhi = naive_interval_enclosure(p, box)
        bf = bernstein_form(p, box)
        assert lo >= max(nlo, bf.min()) - 1e-12 and hi <= min(nhi, bf.max()) + 1e-12
        vals = p.evaluate_many(box.sample(rng, 500))
        assert lo - 1e-9 <= vals.min() and vals.max() <= hi + 1e-9


def test_box_rejects_inverted_interval():
    with pytest.raises(ValueError):
        Box(("x",), (1.0,), (0.0,))
