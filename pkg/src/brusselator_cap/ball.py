"""Center/radius ball arithmetic on IEEE doubles.

The FPU stays in round-to-nearest.  Every center computation is followed by
an a-posteriori error term (one ulp of the result), and every radius is
accumulated with upward-nudged sums, so no global rounding state is touched.

The module also holds the array-level helpers used by the enclosure types:
``up`` inflates a nonnegative floating sum into a rigorous upper bound and
``ball_matmul`` is a Rump-style enclosure of a product of ball matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

U = 2.0**-53
#: stored magnitudes below this are flushed into radii, which keeps every
#: product of two stored numbers in the normal range (no underflow terms)
TINY = 2.0**-400


class BallError(ArithmeticError):
    """Invalid ball, overflow, or division by a ball containing zero."""


def gamma(n: int) -> float:
    """Upper bound for the classic n*u/(1-n*u) accumulation constant."""
    return (n * U) / (1.0 - n * U) * (1.0 + 4 * U)


def sum_up(*xs: float) -> float:
    """Upper bound on the exact sum of the arguments."""
    s = math.fsum(xs)
    return math.nextafter(s, math.inf)


def sum_down(*xs: float) -> float:
    s = math.fsum(xs)
    return math.nextafter(s, -math.inf)


def mul_up(a: float, b: float) -> float:
    """Upper bound on a*b."""
    p = a * b
    return math.nextafter(p, math.inf) if p != 0.0 or (a != 0.0 and b != 0.0) else 0.0


def mul_down(a: float, b: float) -> float:
    p = a * b
    return math.nextafter(p, -math.inf) if p != 0.0 or (a != 0.0 and b != 0.0) else 0.0


def div_up(a: float, b: float) -> float:
    q = a / b
    return math.nextafter(q, math.inf) if q != 0.0 or a != 0.0 else 0.0


def div_down(a: float, b: float) -> float:
    q = a / b
    return math.nextafter(q, -math.inf) if q != 0.0 or a != 0.0 else 0.0


def _check(x: float, what: str) -> float:
    if not math.isfinite(x):
        raise BallError(f"{what} is not finite")
    return x


@dataclass(frozen=True, slots=True)
class Ball:
    center: float
    radius: float = 0.0

    def __post_init__(self):
        c = float(self.center)
        r = float(self.radius)
        _check(c, "center")
        _check(r, "radius")
        if r < 0.0:
            raise BallError("negative radius")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", r)

    # construction ---------------------------------------------------------

    @staticmethod
    def coerce(x) -> "Ball":
        if isinstance(x, Ball):
            return x
        if isinstance(x, Fraction):
            return Ball.from_fraction(x)
        if isinstance(x, int):
            f = float(x)
            if int(f) != x:
                return Ball.from_fraction(Fraction(x))
            return Ball(f)
        return Ball(float(x))

    @staticmethod
    def from_fraction(q: Fraction) -> "Ball":
        c = float(q)
        err = abs(Fraction(c) - q)
        return Ball(c, 0.0 if err == 0 else math.nextafter(float(err), math.inf))

    @staticmethod
    def from_interval(lo: float, hi: float) -> "Ball":
        if not lo <= hi:
            raise BallError("empty interval")
        c = 0.5 * lo + 0.5 * hi
        r = max(sum_up(hi, -c), sum_up(c, -lo))
        return Ball(c, r)

    # queries --------------------------------------------------------------

    @property
    def lower(self) -> float:
        return sum_down(self.center, -self.radius)

    @property
    def upper(self) -> float:
        return sum_up(self.center, self.radius)

    def norm_upper(self) -> float:
        """Upper bound on max |x| over the ball."""
        if self.radius == 0.0:
            return abs(self.center)
        return sum_up(abs(self.center), self.radius)

    def mig(self) -> float:
        """Lower bound on min |x| over the ball (0 if the ball contains 0)."""
        return max(0.0, sum_down(abs(self.center), -self.radius))

    def contains(self, x) -> bool:
        q = Fraction(x) if not isinstance(x, Fraction) else x
        return abs(q - Fraction(self.center)) <= Fraction(self.radius)

    def contains_zero(self) -> bool:
        return abs(self.center) <= self.radius

    def subset_of(self, other: "Ball") -> bool:
        d = abs(Fraction(self.center) - Fraction(other.center))
        return d + Fraction(self.radius) <= Fraction(other.radius)

    # arithmetic -----------------------------------------------------------

    def __neg__(self) -> "Ball":
        return Ball(-self.center, self.radius)

    def __pos__(self) -> "Ball":
        return self

    def __add__(self, other) -> "Ball":
        o = Ball.coerce(other)
        c = self.center + o.center
        _check(c, "sum")
        return Ball(c, sum_up(self.radius, o.radius, math.ulp(c)))

    __radd__ = __add__

    def __sub__(self, other) -> "Ball":
        return self + (-Ball.coerce(other))

    def __rsub__(self, other) -> "Ball":
        return Ball.coerce(other) - self

    def __mul__(self, other) -> "Ball":
        o = Ball.coerce(other)
        c = self.center * o.center
        _check(c, "product")
        r = sum_up(
            mul_up(abs(self.center), o.radius),
            mul_up(self.radius, abs(o.center)),
            mul_up(self.radius, o.radius),
            math.ulp(c),
        )
        return Ball(c, r)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Ball":
        o = Ball.coerce(other)
        m = o.mig()
        if m <= 0.0:
            raise BallError("division by a ball containing zero")
        c = self.center / o.center
        _check(c, "quotient")
        # |x/y - a/b| <= (|b| r_a + |a| r_b) / (|b| (|b| - r_b))
        num = sum_up(mul_up(abs(o.center), self.radius), mul_up(abs(self.center), o.radius))
        # divide in two steps so a tiny divisor cannot underflow the denominator
        r = sum_up(div_up(div_up(num, abs(o.center)), m), math.ulp(c)) if num > 0 else math.ulp(c)
        _check(r, "quotient radius")
        return Ball(c, r)

    def __rtruediv__(self, other) -> "Ball":
        return Ball.coerce(other) / self

    def sqr(self) -> "Ball":
        lo, hi = self.lower, self.upper
        if lo <= 0.0 <= hi:
            return Ball.from_interval(0.0, mul_up(max(-lo, hi), max(-lo, hi)))
        a, b = (lo, hi) if lo > 0 else (-hi, -lo)
        return Ball.from_interval(mul_down(a, a), mul_up(b, b))

    def sqrt(self) -> "Ball":
        lo, hi = self.lower, self.upper
        if hi < 0.0:
            raise BallError("sqrt of a negative ball")
        lo = max(lo, 0.0)
        s_lo = math.nextafter(math.sqrt(lo), -math.inf) if lo > 0 else 0.0
        s_hi = math.nextafter(math.sqrt(hi), math.inf)
        return Ball.from_interval(max(s_lo, 0.0), s_hi)

    def __abs__(self) -> "Ball":
        if not self.contains_zero():
            return Ball(abs(self.center), self.radius)
        return Ball.from_interval(0.0, self.norm_upper())

    def scale(self, k: float) -> "Ball":
        """Multiply by an exactly representable float."""
        return self * Ball(float(k))

    def __pow__(self, n: int) -> "Ball":
        if not isinstance(n, int) or n < 0:
            raise BallError("only nonnegative integer powers")
        out, base = Ball(1.0), self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    def widen(self, r: float) -> "Ball":
        return Ball(self.center, sum_up(self.radius, r))

    # serialization --------------------------------------------------------

    def to_hex(self) -> str:
        return f"{self.center.hex()} {self.radius.hex()}"

    @staticmethod
    def from_hex(text: str) -> "Ball":
        c, r = text.split()
        return Ball(float.fromhex(c), float.fromhex(r))

    def __repr__(self) -> str:
        return f"Ball({self.center!r}, {self.radius!r})"


# --------------------------------------------------------------------------
# array helpers


def up(x, n: int = 1):
    """Upper bound on a nonnegative exact quantity whose floating evaluation
    ``x`` involved at most ``n`` roundings in total (any order of summation).

    Inputs are assumed flushed (see ``flush``) so no term underflows; then
    one product with a factor above 1 + 2 gamma(n+1) + 2u bounds the result.
    """
    x = np.asarray(x, dtype=float)
    y = x * _up_factor(n)
    if y.size and not math.isfinite(float(np.max(y))):
        raise BallError("overflow in radius computation")
    return y


def _up_factor(n: int) -> float:
    f = _UP_FACTORS.get(n)
    if f is None:
        f = _UP_FACTORS[n] = (1.0 + 2.0 * gamma(n + 1)) * (1.0 + 2.0**-50)
    return f


_UP_FACTORS: dict[int, float] = {}


def spacing(c):
    """One ulp of each entry: a bound on its own rounding error."""
    return np.spacing(np.abs(np.asarray(c, dtype=float)))


def ball_matmul(ac, ar, bc, br):
    """Enclose the product of ball matrices (ac, ar) @ (bc, br).

    The radius uses |A|@|B|-type products evaluated in round-to-nearest and
    then inflated with the inner-dimension gamma constant.  Operands must
    be flushed.
    """
    ac = np.asarray(ac, dtype=float)
    bc = np.asarray(bc, dtype=float)
    n = ac.shape[-1]
    cc = ac @ bc
    aa = np.abs(ac)
    rad = aa @ np.abs(bc) * gamma(n)
    if ar is not None and np.any(ar):
        rad = rad + np.asarray(ar) @ (np.abs(bc) + (0 if br is None else np.asarray(br)))
    if br is not None and np.any(br):
        rad = rad + aa @ np.asarray(br)
    rad = up(rad, n + 3)
    if not np.all(np.isfinite(cc)):
        raise BallError("overflow in matrix product")
    return flush(cc, rad)


def flush(c, r):
    """Move magnitudes below TINY from centers into radii and round tiny
    positive radii up to TINY."""
    c = np.asarray(c, dtype=float)
    r = np.asarray(r, dtype=float)
    ac = np.abs(c)
    if np.count_nonzero(ac < TINY) != c.size - np.count_nonzero(c):
        small = (c != 0) & (ac < TINY)
        c = np.where(small, 0.0, c)
        r = np.where(small, r + TINY, r)
    if np.count_nonzero(r < TINY) != r.size - np.count_nonzero(r):
        r = np.where((r > 0) & (r < TINY), TINY, r)
    return c, r
