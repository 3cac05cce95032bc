import math
import warnings
from fractions import Fraction

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from qdyn1d.cfrac import (
    GOLDEN,
    SILVER,
    CFExpansion,
    Surd,
    bounded_density,
    c_lambda,
    cf_expand,
    convergents,
    floor_surd,
    parse_omega,
    sturmian_alpha,
)
from qdyn1d.dynamics import predicted_beta_bound
from qdyn1d.errors import RationalInput, ZeroCoupling
from qdyn1d.potentials import PotentialSpec, RULES, realize, subst_fixed_point


def _surd_lt(p, q, w: Surd) -> bool:
    """Exact ``p/q < w`` for ``q > 0``."""
    # p/q < (wp + sqrt(d))/wq  <=>  p*wq - q*wp < q*sqrt(d)   (wq > 0)
    lhs = p * w.q - q * w.p
    return lhs < 0 or lhs * lhs < q * q * w.d


def test_golden_all_ones():
    exp = cf_expand(GOLDEN, 300)
    assert exp.exact and set(exp.quotients) == {1} and exp.depth == 300


def test_silver_all_twos():
    assert set(cf_expand(SILVER, 100).quotients) == {2}


def test_surd_expansion_sqrt3():
    # sqrt(3) - 1 = [0; 1, 2, 1, 2, ...]
    assert cf_expand(Surd(-1, 3, 1), 8).quotients == (1, 2, 1, 2, 1, 2, 1, 2)


def test_rational_rejected():
    with pytest.raises(RationalInput):
        cf_expand(Fraction(1, 3))
    with pytest.raises(RationalInput):
        cf_expand("0.25")
    with pytest.raises(RationalInput):
        Surd(0, 4, 3)


def test_decimal_input_truncates_with_warning():
    s = "0.6180339887498948482045868343656381177203"
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        exp = cf_expand(s, 200)
    assert exp.truncated and not exp.exact
    assert any("precision" in str(w.message) for w in caught)
    assert 30 <= exp.depth < 200 and set(exp.quotients) == {1}


def test_float_input_matches_leading_quotients():
    exp = cf_expand(math.sqrt(2) - 1, 10)
    assert exp.quotients[:10] == (2,) * 10


def test_parse_omega_tags():
    assert parse_omega("golden") == (GOLDEN, 0.0)
    assert parse_omega("surd:-1,2,1") == (SILVER, 0.0)
    with pytest.raises(TypeError):
        parse_omega([0.5])


def test_omega_range():
    with pytest.raises(ValueError):
        cf_expand(Surd(1, 5, 2))  # 1.618...


@given(st.integers(-50, 50), st.integers(1, 40), st.integers(2, 500), st.integers(-30, 30))
def test_floor_surd_exact(a, b, d, q):
    if q == 0 or math.isqrt(d) ** 2 == d:
        return
    from decimal import Decimal, getcontext

    getcontext().prec = 60
    x = (Decimal(a) + Decimal(b) * Decimal(d).sqrt()) / Decimal(q)
    assert floor_surd(a, b, d, q) == math.floor(x)


def test_convergents_golden_fibonacci():
    qs = [q for _, q in convergents(cf_expand(GOLDEN, 10))]
    assert qs == [1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89]


def test_convergents_single_quotient():
    assert convergents(CFExpansion((4,), exact=True)) == [(0, 1), (1, 4)]


def test_convergents_are_exact_big_integers():
    cs = convergents(cf_expand(GOLDEN, 400))
    p, q = cs[-1]
    assert q > 10**80 and math.gcd(p, q) == 1


@pytest.mark.parametrize("w", [GOLDEN, SILVER, Surd(-1, 3, 1), Surd(-2, 7, 3), Surd(-4, 17, 1)])
def test_convergent_properties(w):
    cs = convergents(cf_expand(w, 60))
    for k in range(1, len(cs)):
        (p0, q0), (p1, q1) = cs[k - 1], cs[k]
        assert q1 * p0 - p1 * q0 == (-1) ** k
    for k, (p, q) in enumerate(cs):
        below = _surd_lt(p, q, w)
        assert below == (k % 2 == 0)
        # |w - p/q| < 1/q^2, checked at high precision
        from decimal import Decimal, getcontext

        getcontext().prec = 200
        wd = (Decimal(w.p) + Decimal(w.d).sqrt()) / Decimal(w.q)
        assert abs(wd - Decimal(p) / Decimal(q)) < Decimal(1) / (Decimal(q) * q)


@settings(max_examples=30)
@given(st.integers(2, 2000))
def test_convergent_sandwich_random_surds(d):
    # sqrt(d) - floor(sqrt(d)) lies in (0, 1)
    if math.isqrt(d) ** 2 == d:
        return
    w = Surd(-math.isqrt(d), d, 1)
    cs = convergents(cf_expand(w, 40))
    for k, (pk, qk) in enumerate(cs):
        assert _surd_lt(pk, qk, w) == (k % 2 == 0)


def test_bounded_density_examples():
    assert bounded_density(cf_expand(GOLDEN, 200)).value == 1.0
    assert bounded_density(CFExpansion((2,) * 20, exact=True)).value == 2.0
    assert bounded_density(CFExpansion((1, 2) * 10, exact=True)).value == 1.5
    with pytest.raises(ValueError):
        bounded_density(CFExpansion((1,) * 9, exact=True))


@given(st.integers(10, 500))
def test_golden_density_depth_invariant(depth):
    assert bounded_density(cf_expand(GOLDEN, depth)).value == 1.0


def test_sturmian_alpha_examples():
    assert c_lambda(1.0) == 5.0
    s = sturmian_alpha(1.0, cf_expand(GOLDEN, 200))
    assert s.c_lambda == 5.0 and s.d_hat == 1.0 and s.D == 1.0
    assert s.alpha == pytest.approx(math.log(5), abs=1e-15)
    assert predicted_beta_bound("power_law", 10, s.alpha) == pytest.approx(
        (10 - 3 * math.log(5)) / (1 + math.log(5)), rel=1e-14)
    with pytest.raises(ZeroCoupling):
        sturmian_alpha(0.0, cf_expand(GOLDEN, 20))
    with pytest.raises(ValueError):
        sturmian_alpha(1.0, cf_expand(GOLDEN, 20), D=0)


@given(st.floats(-50, 50).filter(lambda x: x != 0), st.floats(0.01, 10))
def test_sturmian_alpha_invariants(lam, D):
    s = sturmian_alpha(lam, cf_expand(SILVER, 40), D)
    assert s.c_lambda >= 2 + math.sqrt(8) and s.alpha >= 0
    assert s.alpha == pytest.approx(D * 2.0 * math.log(s.c_lambda))


def test_sturmian_prefix_is_fibonacci_word():
    fib = subst_fixed_point(RULES["fibonacci"], "a", 10**4)
    V = realize(PotentialSpec("sturmian", {"omega": "golden", "theta": 0}), (1, 10**4))
    word = "".join("a" if v == 1.0 else "b" for v in V.values)
    assert word == fib
