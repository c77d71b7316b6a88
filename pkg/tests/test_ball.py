import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brusselator_cap.ball import Ball, BallError, ball_matmul, flush, up

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
radius = st.floats(min_value=0.0, max_value=1e3, allow_nan=False, allow_infinity=False)
balls = st.builds(Ball, finite, radius)
unit = st.fractions(min_value=-1, max_value=1, max_denominator=10**6)


def member(b: Ball, t: Fraction) -> Fraction:
    """The point center + t * radius of the ball, t in [-1, 1]."""
    return Fraction(b.center) + t * Fraction(b.radius)


class TestExamples:
    def test_add_integers(self):
        s = Ball(1.0) + Ball(2.0)
        assert s.contains(3) and s.radius >= 0

    def test_mul_unit_intervals(self):
        p = Ball(0.0, 1.0) * Ball(0.0, 1.0)
        assert p.contains(-1) and p.contains(1)

    def test_div_third_against_rational(self):
        q = Ball(1.0) / Ball(3.0)
        assert q.contains(Fraction(1, 3)) and q.radius > 0

    @pytest.mark.parametrize("b, expect", [(Ball(-2.0, 0.5), 2.5), (Ball(0.0, 0.0), 0.0)])
    def test_norm_upper(self, b, expect):
        assert b.norm_upper() >= expect
        if expect == 0.0:
            assert b.norm_upper() == 0.0

    def test_norm_upper_third(self):
        b = Ball(1 / 3, 2.0**-30)
        assert Fraction(b.norm_upper()) >= Fraction(1, 3) + Fraction(2.0**-30) - Fraction(abs(1 / 3 - Fraction(1, 3)))
        assert Fraction(b.norm_upper()) >= abs(Fraction(b.center)) + Fraction(b.radius)


class TestErrors:
    def test_division_by_zero_ball(self):
        with pytest.raises(BallError):
            Ball(1.0) / Ball(0.0, 1.0)

    @pytest.mark.parametrize("c, r", [(math.nan, 0.0), (0.0, math.inf), (1.0, -1.0)])
    def test_invalid(self, c, r):
        with pytest.raises(BallError):
            Ball(c, r)

    def test_overflow_is_an_error(self):
        with pytest.raises(BallError):
            Ball(1e308) * Ball(1e308)

    def test_sqrt_of_negative(self):
        with pytest.raises(BallError):
            Ball(-2.0, 1.0).sqrt()


class TestContainment:
    @settings(max_examples=300, deadline=None)
    @given(balls, balls, unit, unit)
    def test_binary_ops(self, a, b, s, t):
        x, y = member(a, s), member(b, t)
        assert (a + b).contains(x + y)
        assert (a - b).contains(x - y)
        assert (a * b).contains(x * y)
        if b.mig() > 0:
            assert (a / b).contains(x / y)

    @settings(max_examples=300, deadline=None)
    @given(balls, unit)
    def test_unary_ops(self, a, s):
        x = member(a, s)
        assert abs(a).contains(abs(x))
        assert a.sqr().contains(x * x)
        assert (a**3).contains(x**3)
        assert a.scale(0.375).contains(x * Fraction(0.375))
        if a.lower >= 0:
            r = a.sqrt()
            lo, hi = Fraction(r.lower), Fraction(r.upper)
            assert max(lo, 0) ** 2 <= x <= hi**2

    @settings(max_examples=200, deadline=None)
    @given(balls, balls, radius, radius)
    def test_monotone_under_inclusion(self, a, b, da, db):
        wa, wb = a.widen(da), b.widen(db)
        x, y = Fraction(a.center), Fraction(b.center)
        for op in (lambda p, q: p + q, lambda p, q: p * q):
            assert op(a, b).contains(op(x, y)) and op(wa, wb).contains(op(x, y))
            assert op(wa, wb).radius >= op(a, b).radius

    @settings(max_examples=200, deadline=None)
    @given(balls, balls, unit, unit)
    def test_commutative_as_sets(self, a, b, s, t):
        x, y = member(a, s), member(b, t)
        assert (b + a).contains(x + y) and (b * a).contains(x * y)


class TestArrays:
    def test_up_dominates_exact_sum(self):
        rng = np.random.default_rng(3)
        x = rng.random(1000)
        s = up(np.sum(x), x.size)
        assert Fraction(float(s)) >= sum(Fraction(v) for v in x)

    def test_flush_moves_tiny_centers(self):
        c, r = flush(np.array([1e-130, 1.0]), np.array([0.0, 0.0]))
        assert c[0] == 0.0 and r[0] > 0.0

    def test_ball_matmul_contains_exact_product(self):
        rng = np.random.default_rng(4)
        A = rng.normal(size=(6, 5))
        B = rng.normal(size=(5, 4))
        Ar = np.abs(rng.normal(size=A.shape)) * 1e-9
        c, r = ball_matmul(A, Ar, B, None)
        exact = [[sum(Fraction(A[i, k]) * Fraction(B[k, j]) for k in range(5)) for j in range(4)] for i in range(6)]
        for i in range(6):
            for j in range(4):
                slack = sum(Fraction(Ar[i, k]) * abs(Fraction(B[k, j])) for k in range(5))
                assert abs(exact[i][j] - Fraction(c[i, j])) + slack <= Fraction(r[i, j])


class TestSerialization:
    @given(balls)
    def test_hex_round_trip(self, b):
        assert Ball.from_hex(b.to_hex()) == b
