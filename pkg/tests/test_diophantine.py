import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from superdense.diophantine import (
    BADLY,
    NOT_BADLY,
    RATIONAL,
    NamedConstant,
    continued_fraction,
    beck_chen_predict,
    detect_period,
    from_quotients,
    is_badly_approximable,
    liouville_number,
    slope_report,
    slope_value,
)
from superdense.errors import KTooLarge, ParseError, PrecisionExhausted
from superdense.surface import build_torus, l_surface, regular_octagon


def euclid(fr: Fraction):
    """Plain Euclidean algorithm on numerator and denominator."""
    p, q = fr.numerator, fr.denominator
    out = []
    while q:
        a, r = divmod(p, q)
        out.append(a)
        p, q = q, r
    return out


@pytest.mark.parametrize("name,quot", [("phi", 1), ("sqrt2", 2)])
@pytest.mark.parametrize("depth", [20, 30])
def test_quadratic_expansions(name, quot, depth):
    e = continued_fraction(name, depth)
    assert e.a0 == 1
    assert e.partial_quotients == (quot,) * depth
    assert not e.exact_terminated


def test_sqrt3():
    e = continued_fraction("sqrt3", 30)
    assert e.a0 == 1 and e.partial_quotients == (1, 2) * 15
    assert detect_period(e.partial_quotients) == (0, 2)


@pytest.mark.parametrize("name", ["phi", "sqrt2", "sqrt3"])
def test_periodic(name):
    assert detect_period(continued_fraction(name, 30).partial_quotients) is not None


def test_exact_rational():
    e = continued_fraction(Fraction(355, 113))
    assert e.terms == [3, 7, 16] and e.exact_terminated
    assert str(e) == "[3; 7, 16]"
    assert continued_fraction("355/113").terms == euclid(Fraction(355, 113))


@given(st.fractions(min_value=-1000, max_value=1000, max_denominator=10**9))
def test_reconstruction(x):
    e = continued_fraction(x, depth=200)
    assert e.exact_terminated
    assert e.value() == x
    assert e.terms == euclid(x)


@pytest.mark.parametrize("x", ["phi", "sqrt2", "sqrt3", "e", "pi"])
def test_convergent_quality(x):
    v = slope_value(x)
    conv = continued_fraction(v, 30).convergents()
    with mpmath.workdps(200):
        xv = v.at(200)
        for (p, q), (_, q1) in zip(conv, conv[1:]):
            assert abs(xv - mpmath.mpf(p) / q) < mpmath.mpf(1) / (q * q1)


@pytest.mark.parametrize("x", ["355/113", "liouville_4", "cf:0,1,1000,1,1,1"])
def test_convergent_quality_rational(x):
    # for x = p_n/q_n the last step is an equality
    v = slope_value(x)
    conv = continued_fraction(v, 30).convergents()
    pairs = list(zip(conv, conv[1:]))
    for k, ((p, q), (_, q1)) in enumerate(pairs):
        err, bound = abs(v - Fraction(p, q)), Fraction(1, q * q1)
        assert err < bound if k < len(pairs) - 1 else err == bound


def test_float_precision_exhausted():
    with pytest.raises(PrecisionExhausted) as ei:
        continued_fraction(math.sqrt(2), 40)
    part = ei.value.expansion
    assert part is not None and part.precision_exhausted
    assert part.a0 == 1 and set(part.partial_quotients) == {2}
    assert 10 <= part.depth < 40


def test_badly_approximable():
    c = is_badly_approximable("phi", 30, 10)
    assert c.verdict == BADLY and c.max_quotient_seen == 1
    c = is_badly_approximable(liouville_number(4), 12, 10)
    assert c.verdict == NOT_BADLY and c.max_quotient_seen > 10
    assert is_badly_approximable(Fraction(5, 8)).verdict == RATIONAL


def test_depth_floor():
    with pytest.raises(ValueError):
        is_badly_approximable("phi", depth=5)


def test_liouville():
    assert liouville_number(1) == Fraction(1, 10)
    assert liouville_number(2) == Fraction(11, 100)
    assert liouville_number(3) == Fraction(110001, 10**6)
    with pytest.raises(KTooLarge):
        liouville_number(6)


def test_liouville_quotients_by_hand():
    assert max(euclid(liouville_number(4))[1:]) > 10
    assert max(euclid(liouville_number(3))[1:]) > 10


def test_predict():
    assert beck_chen_predict(build_torus((1, 0), (0, 1)), slope_value("phi")) == "superdense"
    assert beck_chen_predict(l_surface(), liouville_number(3)) == "not_superdense"
    assert beck_chen_predict(regular_octagon(), slope_value("phi")) == "out_of_family"
    assert beck_chen_predict(l_surface(), "vertical") == "not_superdense"


def test_slope_parsing():
    assert slope_value("cf:1,2,2") == Fraction(7, 5)
    assert slope_value("0.25") == Fraction(1, 4)
    assert isinstance(slope_value("golden"), NamedConstant)
    with pytest.raises(ParseError):
        slope_value("banana")


def test_from_quotients_rejects_zero():
    with pytest.raises(ValueError):
        from_quotients([0, 1, 0])


def test_report_keys():
    r = slope_report(slope_value("sqrt2"), 12)
    assert r["expansion"] == [1] + [2] * 12 and r["verdict"] == BADLY
