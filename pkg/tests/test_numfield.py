"""Exact field arithmetic, comparisons and certified embeddings."""

import pytest
from hypothesis import given, settings, strategies as st

from sceneryflow.numfield import (
    QQ,
    AlgebraicField,
    golden_field,
    rational_field,
)


@pytest.fixture(scope="module")
def golden():
    return golden_field()


def test_golden_defining_identity(golden):
    rho = golden.generator()
    assert rho * rho + rho == golden.one()


def test_golden_cube_identity(golden):
    # rho^3 = 2*rho - 1, by repeated reduction
    rho = golden.generator()
    assert rho ** 3 == 2 * rho - 1


def test_additive_identity(golden):
    x = golden.element([QQ(3, 7), QQ(-2, 5)])
    assert x + golden.zero() == x


def test_rational_field_multiplication():
    q = rational_field()
    assert q.element(QQ(2, 3)) * q.element(QQ(3, 4)) == q.element(QQ(1, 2))


def test_inverse_and_division(golden):
    rho = golden.generator()
    assert rho * rho.inverse() == golden.one()
    # 1/rho = rho + 1 in the golden field
    assert rho.inverse() == rho + 1
    assert (rho / rho) == golden.one()


def test_inverse_of_zero_rejected(golden):
    with pytest.raises(ZeroDivisionError):
        golden.zero().inverse()


def test_compare_against_half(golden):
    rho = golden.generator()
    assert rho.compare(QQ(1, 2)) > 0
    assert rho > QQ(1, 2)
    assert rho < 1


def test_compare_equal_elements(golden):
    x = golden.element([QQ(1, 3), QQ(2)])
    assert x.compare(x) == 0


def test_compare_algebraically_equal(golden):
    rho = golden.generator()
    assert (rho * rho).compare(1 - rho) == 0


def test_interval_golden_ratio(golden):
    rho = golden.generator()
    lo, hi = rho.interval(20)
    assert hi - lo <= QQ(1, 2 ** 20)
    # 0.6180339887... is the true value
    assert lo <= QQ(61803398, 10 ** 8) <= hi or lo <= QQ(61803399, 10 ** 8) <= hi
    assert float(rho) == pytest.approx(0.6180339887498949, abs=1e-12)


def test_interval_of_zero_is_degenerate(golden):
    lo, hi = golden.zero().interval(5)
    assert lo == hi == 0


def test_interval_of_rational(golden):
    lo, hi = golden.element(QQ(1, 3)).interval(10)
    assert lo == hi == QQ(1, 3)


def test_minpoly_validation():
    with pytest.raises(ValueError):
        AlgebraicField([1])  # degree 0
    with pytest.raises(ValueError):
        AlgebraicField([1, 0, 2])  # not monic
    with pytest.raises(ValueError):
        AlgebraicField([0, 0, 1])  # x^2: not square-free
    with pytest.raises(ValueError):
        AlgebraicField([-1, 0, 1], (0, 2))  # x^2-1 reducible (rational roots)
    # x^2 - 2 with an interval containing both roots is rejected
    with pytest.raises(ValueError):
        AlgebraicField([-2, 0, 1], (-2, 2))
    # ... and with an interval containing neither
    with pytest.raises(ValueError):
        AlgebraicField([-2, 0, 1], (2, 3))


def test_sqrt2_field_basics():
    f = AlgebraicField([-2, 0, 1], (1, 2))
    r = f.generator()
    assert r * r == f.element(2)
    assert float(r) == pytest.approx(2 ** 0.5, abs=1e-12)


coeff = st.fractions(min_value=-4, max_value=4, max_denominator=8)


@settings(max_examples=60, deadline=None)
@given(a0=coeff, a1=coeff, b0=coeff, b1=coeff, c0=coeff, c1=coeff)
def test_field_axioms(a0, a1, b0, b1, c0, c1):
    golden = golden_field()
    a = golden.element([QQ(a0), QQ(a1)])
    b = golden.element([QQ(b0), QQ(b1)])
    c = golden.element([QQ(c0), QQ(c1)])
    assert (a + b) + c == a + (b + c)
    assert a * (b + c) == a * b + a * c
    assert a * b == b * a
    if not a.is_zero():
        assert a * a.inverse() == golden.one()


@settings(max_examples=40, deadline=None)
@given(a0=coeff, a1=coeff, b0=coeff, b1=coeff)
def test_order_consistent_with_embedding(a0, a1, b0, b1):
    golden = golden_field()
    a = golden.element([QQ(a0), QQ(a1)])
    b = golden.element([QQ(b0), QQ(b1)])
    cmp = a.compare(b)
    alo, ahi = a.interval(40)
    blo, bhi = b.interval(40)
    if cmp < 0:
        assert alo <= bhi
        assert float(a) <= float(b) + 1e-9
    elif cmp > 0:
        assert float(a) >= float(b) - 1e-9
    else:
        assert a.coeffs == b.coeffs
